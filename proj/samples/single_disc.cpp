// Reconstructs one conductive disc on the unit disc with the standard and the
// weighted augmented method, and prints the localization metrics.
#include "eitsfm/experiment.hpp"

#include <iostream>

int main() {
    using namespace eitsfm;
    ExperimentConfig cfg;
    cfg.methods = {"S", "A", "W1"};
    const DomainSetup setup = prepare_domain(cfg, Domain::Disc);
    const CaseSpec spec{"single", Domain::Disc, {disc_anomaly(0.4, 0.1, 0.2, 1.0)}};
    const CaseData data = simulate_case(setup, spec, cfg);

    ExperimentResult result;
    for (double noise : {0.0, 0.01})
        result.runs.push_back(reconstruct_run(setup, data, noise, cfg.seed, cfg));
    std::cout << setup.grid.size() << " pixels, t0 = " << setup.s_factors.truncation << "\n\n"
              << summarize_text(result);
}
