#pragma once

// Complex-quality metrics on CA coordinates. The DockQ score here is a
// residue-level approximation ("DockQ-lite"): contacts are CA-CA pairs
// under 8 A instead of heavy-atom pairs under 5 A.

#include "paradock/protein.hpp"

#include <json.hpp>

#include <vector>

namespace paradock {

// RMSD after optimal rigid superposition of pred onto ref.
double crmsd(const Points& ref, const Points& pred);

struct ComplexCoords {
    Points ligand;
    Points receptor;

    Points stacked() const;  // ligand rows, then receptor rows
};

// CRMSD over the reference pocket residues of both sides (2K rows, with
// repeats), superposed independently of the full complex.
double irmsd(const ComplexCoords& ref, const ComplexCoords& pred, const PocketSet& ref_pockets);

// Fraction of reference CA-CA contacts still in contact in pred.
double fnat(const ComplexCoords& ref, const ComplexCoords& pred, double threshold = kPocketThreshold);

// Ligand RMSD after superposing pred's receptor onto ref's receptor.
double lrmsd(const ComplexCoords& ref, const ComplexCoords& pred);

inline constexpr double kDockqInterfaceScale = 1.5;
inline constexpr double kDockqLigandScale = 8.5;

double dockq_score(double fnat, double irmsd, double lrmsd);

struct MetricReport {
    double crmsd = 0.0;
    double irmsd = 0.0;
    double dockq = 0.0;  // DockQ-lite
    double fnat = 0.0;
    double lrmsd = 0.0;
};

void to_json(nlohmann::json& j, const MetricReport& r);

// Pockets come from the reference complex; throws NoContacts without any.
MetricReport evaluate_complex(const ComplexCoords& ref, const ComplexCoords& pred);

struct Summary {
    double median = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population (divides by n)
};

Summary summarize(std::vector<double> values);

}  // namespace paradock
