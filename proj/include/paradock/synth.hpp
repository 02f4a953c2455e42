#pragma once

// Synthetic complexes separated by a known elliptic paraboloid. The ligand
// sits on the side where the standard surface function is negative, the
// receptor on the positive side; each protein is then moved independently
// to produce its unbound pose.

#include "paradock/dock.hpp"
#include "paradock/protein.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace paradock {

struct SynthConfig {
    int ligand_size = 12;
    int receptor_size = 14;
    double lambda_min = 0.02;
    double lambda_max = 0.1;
    double beta_min = 0.5;           // beta is drawn from -[beta_min, beta_max]
    double beta_max = 1.5;
    double half_width = 7.0;         // x, y range in the standard frame
    double margin = 0.5;             // minimum vertical offset from the surface
    double max_offset = 4.0;
    double min_spacing = 3.0;        // between CA atoms of one protein
    double clearance = 1.0;          // between CA atoms of different proteins
    int min_contacts = 3;            // cross pairs under the pocket threshold
    double translation_range = 10.0; // unbound motions
};

struct SyntheticComplex {
    std::string name;
    StandardParaboloid surface;
    RigidTransform placement;        // standard frame -> bound frame
    RigidTransform ligand_motion;    // bound -> unbound ligand
    RigidTransform receptor_motion;  // bound -> unbound receptor
    Points ligand_bound;
    Points receptor_bound;
    std::vector<int> ligand_types;
    std::vector<int> receptor_types;

    Points ligand_unbound() const { return apply(ligand_motion, ligand_bound); }
    Points receptor_unbound() const { return apply(receptor_motion, receptor_bound); }
    // Interface frames in each protein's unbound pose.
    RigidTransform ligand_frame() const { return ligand_motion.after(placement); }
    RigidTransform receptor_frame() const { return receptor_motion.after(placement); }
    // Unbound ligand -> its docked place next to the unbound receptor.
    RigidTransform truth() const { return receptor_motion.after(ligand_motion.inverse()); }

    ProteinStructure ligand_structure() const;    // chain L, unbound pose
    ProteinStructure receptor_structure() const;  // chain R, unbound pose
};

SyntheticComplex make_synthetic(std::mt19937_64& rng, const SynthConfig& cfg, std::string name);

// Head outputs that reproduce the generator's interfaces exactly, theta = 0.
HeadOutputs oracle_heads(const SyntheticComplex& c, int m_blocks);

// NAME_ligand.pdb, NAME_receptor.pdb (unbound) and NAME_truth.json.
void write_synthetic(const std::filesystem::path& dir, const SyntheticComplex& c);
SyntheticComplex read_synthetic_truth(const std::filesystem::path& truth_json);

// Inverse of softplus for positive inputs.
double inverse_softplus(double y);

}  // namespace paradock
