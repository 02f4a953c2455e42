#include "paradock/protein.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace paradock {

namespace {

constexpr std::array<std::string_view, kNumResidueTypes> kResidueNames = {
    "ALA", "CYS", "ASP", "GLU", "PHE", "GLY", "HIS", "ILE", "LYS", "LEU", "MET",
    "ASN", "PRO", "GLN", "ARG", "SER", "THR", "VAL", "TRP", "TYR", "UNK"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string_view field(std::string_view line, std::size_t first, std::size_t last) {
    // 1-based inclusive PDB columns
    if (line.size() < first) return {};
    return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size() && std::isfinite(out);
}

bool parse_int(std::string_view text, int& out) {
    text = trim(text);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

int residue_type_from_name(std::string_view three_letter) {
    for (int i = 0; i < kNumResidueTypes; ++i) {
        if (kResidueNames[i] == three_letter) return i;
    }
    return kUnknownResidue;
}

std::string_view residue_name(int type) {
    if (type < 0 || type >= kNumResidueTypes) return kResidueNames[kUnknownResidue];
    return kResidueNames[type];
}

std::size_t ProteinStructure::residue_count() const {
    std::size_t n = 0;
    for (const Chain& c : chains) n += c.residues.size();
    return n;
}

Points ProteinStructure::ca_coords() const {
    Points out(residue_count(), 3);
    Eigen::Index row = 0;
    for (const Chain& c : chains)
        for (const Residue& r : c.residues) out.row(row++) = r.ca.transpose();
    return out;
}

std::vector<int> ProteinStructure::residue_types() const {
    std::vector<int> out;
    out.reserve(residue_count());
    for (const Chain& c : chains)
        for (const Residue& r : c.residues) out.push_back(r.type);
    return out;
}

std::vector<int> ProteinStructure::chain_positions() const {
    std::vector<int> out;
    out.reserve(residue_count());
    for (const Chain& c : chains)
        for (std::size_t i = 0; i < c.residues.size(); ++i) out.push_back(static_cast<int>(i));
    return out;
}

ProteinStructure ProteinStructure::with_coords(const Points& coords) const {
    if (static_cast<std::size_t>(coords.rows()) != residue_count()) {
        throw Error(ErrorCode::ShapeMismatch, "with_coords: row count differs from residue count");
    }
    ProteinStructure out = *this;
    Eigen::Index row = 0;
    for (Chain& c : out.chains)
        for (Residue& r : c.residues) r.ca = coords.row(row++).transpose();
    return out;
}

ProteinStructure parse_pdb(std::string_view text) {
    struct Candidate {
        Residue residue;
        double occupancy;
        std::size_t order;
    };
    using Key = std::tuple<char, int, char>;
    std::map<Key, Candidate> best;
    std::vector<char> chain_order;
    ProteinStructure out;

    std::size_t line_no = 0;
    std::size_t order = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;

        if (line.rfind("ENDMDL", 0) == 0) break;  // first model only
        if (line.rfind("ATOM  ", 0) != 0) continue;
        if (trim(line).size() < 54) parse_error(line_no, "ATOM record shorter than 54 columns");

        Vec3 xyz;
        if (!parse_double(field(line, 31, 38), xyz(0)) || !parse_double(field(line, 39, 46), xyz(1)) ||
            !parse_double(field(line, 47, 54), xyz(2))) {
            parse_error(line_no, "malformed coordinates");
        }
        int seq = 0;
        if (!parse_int(field(line, 23, 26), seq)) parse_error(line_no, "malformed residue number");
        if (trim(field(line, 13, 16)) != "CA") continue;

        double occupancy = 1.0;
        const std::string_view occ = trim(field(line, 55, 60));
        if (!occ.empty() && !parse_double(occ, occupancy)) parse_error(line_no, "malformed occupancy");

        Residue r;
        r.name = std::string(trim(field(line, 18, 20)));
        r.type = residue_type_from_name(r.name);
        r.chain = line[21];
        r.seq = seq;
        r.icode = line.size() > 26 ? line[26] : ' ';
        r.ca = xyz;

        const Key key{r.chain, r.seq, r.icode};
        auto it = best.find(key);
        if (it == best.end()) {
            if (std::find(chain_order.begin(), chain_order.end(), r.chain) == chain_order.end()) {
                chain_order.push_back(r.chain);
            }
            best.emplace(key, Candidate{std::move(r), occupancy, order++});
        } else if (occupancy > it->second.occupancy) {
            it->second.residue.ca = xyz;
            it->second.occupancy = occupancy;
        }
    }

    if (best.empty()) throw Error(ErrorCode::EmptyStructure, "no CA atoms in ATOM records");

    for (char id : chain_order) {
        Chain chain;
        chain.id = id;
        std::vector<const Candidate*> members;
        for (const auto& [key, cand] : best)
            if (std::get<0>(key) == id) members.push_back(&cand);
        // map order is (seq, icode); keep it
        for (const Candidate* c : members) {
            if (c->residue.type == kUnknownResidue) ++out.unknown_residues;
            chain.residues.push_back(c->residue);
        }
        out.chains.push_back(std::move(chain));
    }
    return out;
}

ProteinStructure read_pdb(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_pdb(buf.str());
}

std::string format_pdb(const ProteinStructure& s) {
    std::string out;
    char line[96];
    int serial = 1;
    for (const Chain& c : s.chains) {
        const Residue* last = nullptr;
        for (const Residue& r : c.residues) {
            const std::string name = r.name.empty() ? std::string(residue_name(r.type)) : r.name;
            std::snprintf(line, sizeof line,
                          "ATOM  %5d  CA  %3.3s %c%4d%c   %8.3f%8.3f%8.3f%6.2f%6.2f           C  \n",
                          serial++ % 100000, name.c_str(), c.id, r.seq, r.icode, r.ca(0), r.ca(1),
                          r.ca(2), 1.0, 0.0);
            out += line;
            last = &r;
        }
        if (last != nullptr) {
            std::snprintf(line, sizeof line, "TER   %5d      %3.3s %c%4d%c\n", serial++ % 100000,
                          (last->name.empty() ? std::string(residue_name(last->type)) : last->name).c_str(),
                          c.id, last->seq, last->icode);
            out += line;
        }
    }
    out += "END\n";
    return out;
}

void write_pdb(const std::filesystem::path& path, const ProteinStructure& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << format_pdb(s);
}

Eigen::VectorXd positional_embedding(int index, int width) {
    if (width <= 0 || width % 2 != 0) {
        throw Error(ErrorCode::ConfigError, "positional embedding width must be even and positive");
    }
    Eigen::VectorXd out(width);
    for (int d = 0; d < width / 2; ++d) {
        const double w = std::pow(10000.0, -2.0 * d / width);
        out(2 * d) = index * std::sin(w);
        out(2 * d + 1) = index * std::cos(w);
    }
    return out;
}

Eigen::VectorXd rbf_expand(double distance, const GraphConfig& cfg) {
    Eigen::VectorXd out(cfg.rbf_size);
    const double step = cfg.rbf_size > 1 ? cfg.rbf_max / (cfg.rbf_size - 1) : 0.0;
    for (int m = 0; m < cfg.rbf_size; ++m) {
        const double z = (distance - m * step) / cfg.rbf_sigma;
        out(m) = std::exp(-z * z);
    }
    return out;
}

std::vector<int> nearest_neighbors(const Points& coords, int node, int k) {
    const int n = static_cast<int>(coords.rows());
    std::vector<int> idx;
    idx.reserve(n - 1);
    for (int j = 0; j < n; ++j)
        if (j != node) idx.push_back(j);
    std::vector<double> dist(n);
    for (int j : idx) dist[j] = (coords.row(j) - coords.row(node)).squaredNorm();
    const auto closer = [&](int a, int b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
    const int keep = std::min<int>(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(), closer);
    idx.resize(keep);
    return idx;
}

Points resultant_directions(const Points& coords, const std::vector<int>& offsets,
                            const std::vector<int>& source, int alpha) {
    const Eigen::Index n = coords.rows();
    Points out = Points::Zero(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        Vec3 sum = Vec3::Zero();
        for (int e = offsets[i]; e < offsets[i + 1]; ++e) {
            const Vec3 s = (coords.row(i) - coords.row(source[e])).transpose();
            const double len = s.norm();
            if (len < 1e-12) continue;  // coincident residues exert no direction
            sum += std::pow(len, -alpha - 1.0) * s;
        }
        const double mag = sum.norm();
        if (mag >= 1e-12) out.row(i) = (sum / mag).transpose();
    }
    return out;
}

double resultant_force_feature(const ProteinGraph& g, int edge, int alpha) {
    const Points dirs = resultant_directions(g.coords, g.offsets, g.source, alpha);
    return dirs.row(g.target[edge]).dot(dirs.row(g.source[edge]));
}

ProteinGraph build_graph(const Points& coords, std::vector<int> residue_types,
                         const std::vector<int>& positions, const GraphConfig& cfg) {
    const int n = static_cast<int>(coords.rows());
    if (n < 1) throw Error(ErrorCode::EmptyStructure, "graph needs at least one node");
    if (cfg.k < 1) throw Error(ErrorCode::ConfigError, "k must be >= 1");
    if (static_cast<int>(residue_types.size()) != n || static_cast<int>(positions.size()) != n) {
        throw Error(ErrorCode::ShapeMismatch, "per-residue arrays differ from coordinate count");
    }

    ProteinGraph g;
    g.coords = coords;
    g.residue_types = std::move(residue_types);
    g.positional.resize(n, cfg.embed_dim);
    for (int i = 0; i < n; ++i) g.positional.row(i) = positional_embedding(positions[i], cfg.embed_dim).transpose();

    g.offsets.assign(1, 0);
    for (int i = 0; i < n; ++i) {
        for (int j : nearest_neighbors(coords, i, cfg.k)) {
            g.source.push_back(j);
            g.target.push_back(i);
        }
        g.offsets.push_back(static_cast<int>(g.source.size()));
    }

    std::array<Points, 3> dirs;
    for (int a = 0; a < 3; ++a) dirs[a] = resultant_directions(coords, g.offsets, g.source, a + 2);

    g.edge_features.resize(g.num_edges(), cfg.edge_dim());
    for (int e = 0; e < g.num_edges(); ++e) {
        const int i = g.target[e];
        const int j = g.source[e];
        const double d = (coords.row(i) - coords.row(j)).norm();
        g.edge_features.row(e).head(cfg.rbf_size) = rbf_expand(d, cfg).transpose();
        for (int a = 0; a < 3; ++a) g.edge_features(e, cfg.rbf_size + a) = dirs[a].row(i).dot(dirs[a].row(j));
        g.edge_features(e, cfg.rbf_size + 3) = d;
    }
    return g;
}

ProteinGraph build_graph(const ProteinStructure& s, const GraphConfig& cfg) {
    return build_graph(s.ca_coords(), s.residue_types(), s.chain_positions(), cfg);
}

ProteinGraph moved(const ProteinGraph& g, const RigidTransform& t) {
    ProteinGraph out = g;
    out.coords = apply(t, g.coords);
    return out;
}

PocketSet extract_pockets(const Points& ligand_bound, const Points& receptor_bound, double threshold) {
    PocketSet p;
    std::vector<Vec3> mids;
    for (Eigen::Index i = 0; i < ligand_bound.rows(); ++i) {
        for (Eigen::Index j = 0; j < receptor_bound.rows(); ++j) {
            if ((ligand_bound.row(i) - receptor_bound.row(j)).norm() < threshold) {
                p.ligand_indices.push_back(static_cast<int>(i));
                p.receptor_indices.push_back(static_cast<int>(j));
                mids.push_back(0.5 * (ligand_bound.row(i) + receptor_bound.row(j)).transpose());
            }
        }
    }
    if (mids.empty()) throw Error(ErrorCode::NoContacts, "no cross pair closer than threshold");
    p.ligand_midpoints.resize(static_cast<Eigen::Index>(mids.size()), 3);
    for (std::size_t k = 0; k < mids.size(); ++k) p.ligand_midpoints.row(k) = mids[k].transpose();
    p.receptor_midpoints = p.ligand_midpoints;
    return p;
}

PocketSet track_pockets(const PocketSet& pockets, const RigidTransform& t, Side side) {
    PocketSet out = pockets;
    Points& target = side == Side::Ligand ? out.ligand_midpoints : out.receptor_midpoints;
    target = apply(t, target);
    return out;
}

}  // namespace paradock
