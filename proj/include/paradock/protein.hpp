#pragma once

// Residue-level protein structures, kNN graphs and contact pockets.

#include "paradock/geometry.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace paradock {

// 20 canonical amino acids in alphabetical one-letter order, then UNK.
inline constexpr int kNumResidueTypes = 21;
inline constexpr int kUnknownResidue = 20;

int residue_type_from_name(std::string_view three_letter);
std::string_view residue_name(int type);

struct Residue {
    int type = kUnknownResidue;
    std::string name;  // as written in the file
    char chain = 'A';
    int seq = 0;       // resSeq
    char icode = ' ';
    Vec3 ca = Vec3::Zero();
};

struct Chain {
    char id = 'A';
    std::vector<Residue> residues;
};

struct ProteinStructure {
    std::vector<Chain> chains;
    int unknown_residues = 0;  // residues mapped to UNK while parsing

    std::size_t residue_count() const;
    Points ca_coords() const;
    std::vector<int> residue_types() const;
    // Index of each residue within its own chain.
    std::vector<int> chain_positions() const;
    // Copy with CA coordinates replaced row by row.
    ProteinStructure with_coords(const Points& coords) const;
};

ProteinStructure parse_pdb(std::string_view text);
ProteinStructure read_pdb(const std::filesystem::path& path);

// CA-only PDB text, 3-decimal coordinates.
std::string format_pdb(const ProteinStructure& s);
void write_pdb(const std::filesystem::path& path, const ProteinStructure& s);

struct GraphConfig {
    int k = 10;
    int embed_dim = 64;       // D, width of the positional embedding
    int rbf_size = 20;
    double rbf_sigma = 3.0;   // Gaussian length scale (A)
    double rbf_max = 20.0;    // centres evenly spaced on [0, rbf_max]

    // rbf, three resultant-force scalars, distance
    int edge_dim() const { return rbf_size + 4; }
};

// Directed kNN graph over CA atoms. Edges are grouped by destination: the
// in-edges of node i are [offsets[i], offsets[i+1]), nearest first.
struct ProteinGraph {
    Points coords;
    std::vector<int> residue_types;
    Eigen::MatrixXd positional;      // N x D
    std::vector<int> offsets;        // N + 1
    std::vector<int> source;         // j of edge j -> i
    std::vector<int> target;         // i of edge j -> i
    Eigen::MatrixXd edge_features;   // E x edge_dim

    int num_nodes() const { return static_cast<int>(coords.rows()); }
    int num_edges() const { return static_cast<int>(source.size()); }
    std::span<const int> neighbors(int i) const {
        return {source.data() + offsets[i], source.data() + offsets[i + 1]};
    }
};

// i * sin(w_d), i * cos(w_d) with w_d = 10000^(-2d/D), d = 0..D/2-1.
Eigen::VectorXd positional_embedding(int index, int width);

Eigen::VectorXd rbf_expand(double distance, const GraphConfig& cfg);

// Unit direction of the alpha-order resultant force on each node from its
// in-neighbours; zero when the resultant vanishes.
Points resultant_directions(const Points& coords, const std::vector<int>& offsets,
                            const std::vector<int>& source, int alpha);

double resultant_force_feature(const ProteinGraph& g, int edge, int alpha);

// Indices of the k nearest other nodes, nearest first, ties to lower index.
std::vector<int> nearest_neighbors(const Points& coords, int node, int k);

ProteinGraph build_graph(const Points& coords, std::vector<int> residue_types,
                         const std::vector<int>& positions, const GraphConfig& cfg);
ProteinGraph build_graph(const ProteinStructure& s, const GraphConfig& cfg);

// The same graph with coordinates moved rigidly. Edge features are rigid
// invariants, so only coords change.
ProteinGraph moved(const ProteinGraph& g, const RigidTransform& t);

enum class Side { Ligand, Receptor };

// Cross-protein contacts of a bound complex. Both sides start with the same
// midpoints; tracking moves one side's copy with its protein.
struct PocketSet {
    Points ligand_midpoints;
    Points receptor_midpoints;
    std::vector<int> ligand_indices;
    std::vector<int> receptor_indices;

    int size() const { return static_cast<int>(ligand_indices.size()); }
};

inline constexpr double kPocketThreshold = 8.0;

PocketSet extract_pockets(const Points& ligand_bound, const Points& receptor_bound,
                          double threshold = kPocketThreshold);

PocketSet track_pockets(const PocketSet& pockets, const RigidTransform& t, Side side);

}  // namespace paradock
