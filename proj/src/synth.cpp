#include "paradock/synth.hpp"

#include "paradock/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace paradock {

namespace {

constexpr int kMaxAttempts = 10000;

bool far_enough(const std::vector<Vec3>& pts, const Vec3& p, double min_dist) {
    for (const Vec3& q : pts)
        if ((p - q).norm() < min_dist) return false;
    return true;
}

Points to_points(const std::vector<Vec3>& pts) {
    Points out(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    return out;
}

RigidTransform random_motion(std::mt19937_64& rng, double range) {
    std::uniform_real_distribution<double> u(-range, range);
    RigidTransform t;
    t.rotation = random_rotation(rng);
    t.translation = Vec3(u(rng), u(rng), u(rng));
    return t;
}

ProteinStructure structure_from(const Points& coords, const std::vector<int>& types, char chain_id) {
    ProteinStructure s;
    Chain chain;
    chain.id = chain_id;
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        Residue r;
        r.type = types[static_cast<std::size_t>(i)];
        r.name = std::string(residue_name(r.type));
        r.chain = chain_id;
        r.seq = static_cast<int>(i) + 1;
        r.ca = coords.row(i).transpose();
        chain.residues.push_back(std::move(r));
    }
    s.chains.push_back(std::move(chain));
    return s;
}

nlohmann::json transform_json(const RigidTransform& t) {
    nlohmann::json rot = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rot.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
    return {{"rotation", rot}, {"translation", {t.translation(0), t.translation(1), t.translation(2)}}};
}

RigidTransform transform_from(const nlohmann::json& j) {
    RigidTransform t;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = j.at("rotation").at(r).at(c).get<double>();
        t.translation(r) = j.at("translation").at(r).get<double>();
    }
    return t;
}

nlohmann::json points_json(const Points& p) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back({p(i, 0), p(i, 1), p(i, 2)});
    return out;
}

Points points_from(const nlohmann::json& j) {
    Points p(static_cast<Eigen::Index>(j.size()), 3);
    for (std::size_t i = 0; i < j.size(); ++i)
        for (int c = 0; c < 3; ++c) p(static_cast<Eigen::Index>(i), c) = j.at(i).at(c).get<double>();
    return p;
}

}  // namespace

ProteinStructure SyntheticComplex::ligand_structure() const {
    return structure_from(ligand_unbound(), ligand_types, 'L');
}

ProteinStructure SyntheticComplex::receptor_structure() const {
    return structure_from(receptor_unbound(), receptor_types, 'R');
}

double inverse_softplus(double y) {
    if (!(y > 0.0)) throw Error(ErrorCode::ConfigError, "inverse softplus needs a positive value");
    return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

SyntheticComplex make_synthetic(std::mt19937_64& rng, const SynthConfig& cfg, std::string name) {
    if (cfg.ligand_size < 2 || cfg.receptor_size < 2) throw Error(ErrorCode::ConfigError, "synthetic proteins need 2+ residues");
    if (cfg.margin <= 0.0 || cfg.max_offset <= cfg.margin) throw Error(ErrorCode::ConfigError, "bad offset range");

    std::uniform_real_distribution<double> lam(cfg.lambda_min, cfg.lambda_max);
    std::uniform_real_distribution<double> beta(cfg.beta_min, cfg.beta_max);
    std::uniform_real_distribution<double> xy(-cfg.half_width, cfg.half_width);
    std::uniform_real_distribution<double> offset(cfg.margin, cfg.max_offset);
    std::uniform_int_distribution<int> type(0, kNumResidueTypes - 2);

    SyntheticComplex c;
    c.name = std::move(name);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        c.surface = StandardParaboloid{lam(rng), lam(rng), -beta(rng)};
        const double l1 = c.surface.lambda1, l2 = c.surface.lambda2, b = c.surface.beta;
        // Surface height z_s with lambda1 x^2 + lambda2 y^2 + beta z_s = 0.
        auto height = [&](double x, double y) { return -(l1 * x * x + l2 * y * y) / b; };

        std::vector<Vec3> lig, rec;
        int tries = 0;
        while ((static_cast<int>(lig.size()) < cfg.ligand_size || static_cast<int>(rec.size()) < cfg.receptor_size) &&
               tries < kMaxAttempts) {
            ++tries;
            const bool for_ligand = static_cast<int>(lig.size()) < cfg.ligand_size &&
                                    (static_cast<int>(rec.size()) >= cfg.receptor_size || lig.size() <= rec.size());
            const double x = xy(rng), y = xy(rng);
            const double dz = offset(rng);
            const Vec3 p(x, y, height(x, y) + (for_ligand ? dz : -dz));
            auto& own = for_ligand ? lig : rec;
            const auto& other = for_ligand ? rec : lig;
            if (far_enough(own, p, cfg.min_spacing) && far_enough(other, p, cfg.clearance)) own.push_back(p);
        }
        if (static_cast<int>(lig.size()) < cfg.ligand_size || static_cast<int>(rec.size()) < cfg.receptor_size) continue;

        int contacts = 0;
        for (const Vec3& a : lig)
            for (const Vec3& r : rec)
                if ((a - r).norm() < kPocketThreshold) ++contacts;
        if (contacts < cfg.min_contacts) continue;

        c.placement = random_motion(rng, cfg.translation_range);
        c.ligand_bound = apply(c.placement, to_points(lig));
        c.receptor_bound = apply(c.placement, to_points(rec));
        c.ligand_motion = random_motion(rng, cfg.translation_range);
        c.receptor_motion = random_motion(rng, cfg.translation_range);
        c.ligand_types.resize(lig.size());
        c.receptor_types.resize(rec.size());
        for (int& t : c.ligand_types) t = type(rng);
        for (int& t : c.receptor_types) t = type(rng);
        return c;
    }
    throw Error(ErrorCode::ConfigError, "could not place a synthetic complex with these settings");
}

HeadOutputs oracle_heads(const SyntheticComplex& c, int m_blocks) {
    auto head = [&](const RigidTransform& frame, const Points& coords) {
        Eigen::MatrixXd e(3 * m_blocks + 1, 3);
        for (int j = 0; j < m_blocks; ++j) e.block(3 * j, 0, 3, 3) = frame.rotation.transpose() / m_blocks;
        e.row(3 * m_blocks) = (frame.translation - centroid(coords)).transpose();
        return e;
    };
    HeadOutputs h;
    h.ligand_F = Eigen::MatrixXd::Zero(1, 4);
    h.receptor_F = Eigen::MatrixXd::Zero(1, 4);
    h.ligand_F(0, 0) = inverse_softplus(c.surface.lambda1);
    h.ligand_F(0, 1) = inverse_softplus(c.surface.lambda2);
    h.ligand_F(0, 2) = c.surface.beta;
    h.ligand_E = head(c.ligand_frame(), c.ligand_unbound());
    h.receptor_E = head(c.receptor_frame(), c.receptor_unbound());
    return h;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticComplex& c) {
    std::filesystem::create_directories(dir);
    write_pdb(dir / (c.name + "_ligand.pdb"), c.ligand_structure());
    write_pdb(dir / (c.name + "_receptor.pdb"), c.receptor_structure());
    const RigidTransform gt = c.truth().inverse();  // ligand presented as gt(bound-in-receptor-frame)
    nlohmann::json j = {
        {"schema_version", 1},
        {"name", c.name},
        {"surface", {{"lambda1", c.surface.lambda1}, {"lambda2", c.surface.lambda2}, {"beta", c.surface.beta}}},
        {"placement", transform_json(c.placement)},
        {"ligand_motion", transform_json(c.ligand_motion)},
        {"receptor_motion", transform_json(c.receptor_motion)},
        {"truth", transform_json(c.truth())},
        {"q_gt", transform_json(gt)["rotation"]},
        {"t_gt", transform_json(gt)["translation"]},
        {"ligand_frame", transform_json(c.ligand_frame())},
        {"receptor_frame", transform_json(c.receptor_frame())},
        {"ligand_bound", points_json(c.ligand_bound)},
        {"receptor_bound", points_json(c.receptor_bound)},
        {"ligand_types", c.ligand_types},
        {"receptor_types", c.receptor_types},
    };
    std::ofstream out(dir / (c.name + "_truth.json"));
    if (!out) throw Error(ErrorCode::IoError, "cannot write truth file for " + c.name);
    out << j.dump(2) << '\n';
}

SyntheticComplex read_synthetic_truth(const std::filesystem::path& truth_json) {
    std::ifstream in(truth_json);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + truth_json.string());
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        SyntheticComplex c;
        c.name = j.at("name").get<std::string>();
        c.surface = StandardParaboloid{j.at("surface").at("lambda1").get<double>(),
                                       j.at("surface").at("lambda2").get<double>(),
                                       j.at("surface").at("beta").get<double>()};
        c.placement = transform_from(j.at("placement"));
        c.ligand_motion = transform_from(j.at("ligand_motion"));
        c.receptor_motion = transform_from(j.at("receptor_motion"));
        c.ligand_bound = points_from(j.at("ligand_bound"));
        c.receptor_bound = points_from(j.at("receptor_bound"));
        c.ligand_types = j.at("ligand_types").get<std::vector<int>>();
        c.receptor_types = j.at("receptor_types").get<std::vector<int>>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, truth_json.string() + ": " + e.what());
    }
}

}  // namespace paradock
