#include "tiltrisk/selftest.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "tiltrisk/error.hpp"
#include "tiltrisk/estimators.hpp"
#include "tiltrisk/eta_select.hpp"
#include "tiltrisk/simgen.hpp"

namespace tiltrisk {

namespace {

struct Check {
    std::string name;
    std::function<double()> error;  // observed discrepancy
    double tolerance;
};

}  // namespace

int run_selftest(std::uint64_t seed, std::ostream& out) {
    const SimulatedData sim = generate(standard_binary_dgp(StudyDesign::non_nested, 400, 0.5), seed);
    const SimulatedData nested = generate(standard_binary_dgp(StudyDesign::nested, 400, 0.5), seed + 1);
    const double eta = 0.7;
    const Tilt tilt(eta);

    const std::vector<Check> checks = {
        {"aug reduces to cl when p is one",
         [&] {
             const FittedNuisance f = FittedNuisance::fit(sim.table, dgp_recipe(standard_binary_dgp()));
             NuisanceSet n = f.at(eta);
             n.p.setOnes();
             return std::abs(phi_aug(sim.table, n, tilt).estimate - phi_cl(sim.table, n, tilt).estimate);
         },
         1e-12},
        {"selection offset parameterization matches aug",
         [&] {
             const FittedNuisance f = FittedNuisance::fit(sim.table, dgp_recipe(standard_binary_dgp()));
             NuisanceSet n = f.at(eta);
             Eigen::VectorXd a(n.p.size());
             for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = selection_a(n.p(i), n.c(i));
             n.a = a;
             return std::abs(phi_aug_alt(sim.table, n, tilt).estimate - phi_aug(sim.table, n, tilt).estimate);
         },
         1e-12},
        {"nested influence values are centered",
         [&] {
             const FittedNuisance f = FittedNuisance::fit(nested.table, dgp_recipe(standard_binary_dgp()));
             const NuisanceSet n = f.at(eta);
             const double est = psi_aug(nested.table, n, tilt).estimate;
             return std::abs(influence_values_nested(nested.table, n, tilt, est).mean);
         },
         1e-10},
        {"cl matches brute-force enumeration",
         [&] {
             std::vector<Eigen::Index> rows;
             for (Eigen::Index i = 0; i < sim.table.rows() && rows.size() < 6; ++i) rows.push_back(i);
             ObservationTable small = sim.table.subset(rows);
             small.design = StudyDesign::nested;
             const Eigen::VectorXd g = select_rows(sim.truth.mean, rows);
             const NuisanceSet n = binary_nuisance(small, g, Eigen::VectorXd::Ones(small.rows()), LossFunction::brier(), eta);
             return std::abs(psi_cl(small, n, tilt).estimate - brute_force_psi(small, g, LossFunction::brier(), eta));
         },
         1e-12},
        {"eta round trip from prevalence",
         [&] {
             const double mu = implied_prevalence_nonnested(sim.table, sim.truth.mean, eta);
             return std::abs(eta_from_prevalence_nonnested(sim.table, sim.truth.mean, mu) - eta);
         },
         1e-8},
    };

    int failures = 0;
    for (const auto& c : checks) {
        double err = 0.0;
        std::string note;
        try {
            err = c.error();
        } catch (const Error& e) {
            err = INFINITY;
            note = std::string(" (") + e.what() + ")";
        }
        const bool pass = err <= c.tolerance;
        failures += !pass;
        out << (pass ? "PASS " : "FAIL ") << c.name << ": discrepancy " << err << " (tolerance " << c.tolerance << ")"
            << note << "\n";
    }
    return failures;
}

}  // namespace tiltrisk
