#include "paradock/metrics.hpp"

#include "paradock/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace paradock {

double crmsd(const Points& ref, const Points& pred) {
    if (ref.rows() != pred.rows()) throw Error(ErrorCode::ShapeMismatch, "crmsd: point counts differ");
    if (ref.rows() < 3) throw Error(ErrorCode::TooFewPoints, "crmsd needs at least 3 points");
    const RigidTransform fit = kabsch(pred, ref);
    const Points aligned = apply(fit, pred);
    return std::sqrt((ref - aligned).squaredNorm() / static_cast<double>(ref.rows()));
}

Points ComplexCoords::stacked() const {
    Points out(ligand.rows() + receptor.rows(), 3);
    out << ligand, receptor;
    return out;
}

namespace {

Points select_rows(const Points& x, const std::vector<int>& rows) {
    Points out(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

void check_correspondence(const ComplexCoords& ref, const ComplexCoords& pred) {
    if (ref.ligand.rows() != pred.ligand.rows() || ref.receptor.rows() != pred.receptor.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "reference and prediction residue counts differ");
    }
}

}  // namespace

double irmsd(const ComplexCoords& ref, const ComplexCoords& pred, const PocketSet& ref_pockets) {
    check_correspondence(ref, pred);
    if (ref_pockets.size() == 0) throw Error(ErrorCode::NoContacts, "irmsd: no pocket residues");
    auto pocket_nodes = [&](const ComplexCoords& c) {
        Points out(2 * ref_pockets.size(), 3);
        out << select_rows(c.ligand, ref_pockets.ligand_indices), select_rows(c.receptor, ref_pockets.receptor_indices);
        return out;
    };
    return crmsd(pocket_nodes(ref), pocket_nodes(pred));
}

double fnat(const ComplexCoords& ref, const ComplexCoords& pred, double threshold) {
    check_correspondence(ref, pred);
    int total = 0;
    int kept = 0;
    for (Eigen::Index i = 0; i < ref.ligand.rows(); ++i) {
        for (Eigen::Index j = 0; j < ref.receptor.rows(); ++j) {
            if ((ref.ligand.row(i) - ref.receptor.row(j)).norm() >= threshold) continue;
            ++total;
            if ((pred.ligand.row(i) - pred.receptor.row(j)).norm() < threshold) ++kept;
        }
    }
    if (total == 0) throw Error(ErrorCode::NoContacts, "fnat: reference complex has no contacts");
    return static_cast<double>(kept) / total;
}

double lrmsd(const ComplexCoords& ref, const ComplexCoords& pred) {
    check_correspondence(ref, pred);
    const RigidTransform fit = kabsch(pred.receptor, ref.receptor);
    const Points lig = apply(fit, pred.ligand);
    return std::sqrt((lig - ref.ligand).squaredNorm() / static_cast<double>(lig.rows()));
}

double dockq_score(double fnat_value, double irmsd_value, double lrmsd_value) {
    const double i = irmsd_value / kDockqInterfaceScale;
    const double l = lrmsd_value / kDockqLigandScale;
    return (fnat_value + 1.0 / (1.0 + i * i) + 1.0 / (1.0 + l * l)) / 3.0;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = nlohmann::json{
        {"crmsd", r.crmsd}, {"irmsd", r.irmsd}, {"dockq_lite", r.dockq}, {"fnat", r.fnat}, {"lrmsd", r.lrmsd}};
}

MetricReport evaluate_complex(const ComplexCoords& ref, const ComplexCoords& pred) {
    check_correspondence(ref, pred);
    const PocketSet pockets = extract_pockets(ref.ligand, ref.receptor);
    MetricReport r;
    r.crmsd = crmsd(ref.stacked(), pred.stacked());
    r.irmsd = irmsd(ref, pred, pockets);
    r.fnat = fnat(ref, pred);
    r.lrmsd = lrmsd(ref, pred);
    r.dockq = dockq_score(r.fnat, r.irmsd, r.lrmsd);
    return r;
}

Summary summarize(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::ConfigError, "cannot summarize an empty list");
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    Summary s;
    s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / static_cast<double>(n));
    return s;
}

}  // namespace paradock
