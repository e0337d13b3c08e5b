#ifndef EITSFM_EXPERIMENT_HPP
#define EITSFM_EXPERIMENT_HPP

#include "eitsfm/config.hpp"
#include "eitsfm/forward.hpp"
#include "eitsfm/geometry.hpp"
#include "eitsfm/heatmap.hpp"
#include "eitsfm/io.hpp"
#include "eitsfm/metrics.hpp"
#include "eitsfm/pixel_grid.hpp"
#include "eitsfm/reconstruction.hpp"
#include "eitsfm/sensitivity.hpp"
#include "eitsfm/sfm.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace eitsfm {

/// Error raised by a pipeline stage; `stage` names the step that failed.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

template <typename F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

/// Everything that depends only on the domain: mesh, electrodes, pixel grid,
/// reference potentials and the sensitivity matrix with its truncated SVD.
struct DomainSetup {
    Domain domain = Domain::Disc;
    TriMesh mesh;
    ElectrodeLayout layout;
    PixelGrid grid;
    Eigen::VectorXd sigma0;
    PotentialSet reference;
    VoltageDataSet reference_voltages;
    SensitivityMatrix sens;
    TsvdFactors s_factors;
};

inline RadiusFunction domain_radius(const ExperimentConfig& cfg, Domain domain) {
    if (domain == Domain::Disc) return [](double) { return 1.0; };
    const double d = cfg.deformation;
    return [d](double theta) { return 1.0 + d * std::cos(2.0 * theta); };
}

inline DomainSetup prepare_domain(const ExperimentConfig& cfg, Domain domain) {
    DomainSetup s;
    s.domain = domain;
    const bool disc = domain == Domain::Disc;
    staged("mesh", [&] {
        s.mesh = build_star_mesh(domain_radius(cfg, domain), disc ? cfg.disc_elements : cfg.deformed_elements);
        validate_mesh(s.mesh);
        s.layout = place_electrodes(s.mesh, cfg.electrodes);
        s.grid = build_pixel_grid(s.mesh, disc ? cfg.disc_pixels : cfg.deformed_pixels,
                                  cfg.margin_edges * s.mesh.mean_boundary_edge());
    });
    staged("forward", [&] {
        s.sigma0 = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.mesh.triangle_count()), cfg.sigma0);
        const NeumannSolver solver(s.mesh, s.sigma0);
        s.reference = solve_patterns(solver, s.layout);
        s.reference_voltages = measure_voltages(s.reference, s.layout, "reference");
    });
    staged("sense", [&] {
        s.sens = assemble_sensitivity(s.mesh, s.reference, s.grid);
        const auto rule = cfg.rho > 0.0 ? TruncationRule::relative(cfg.rho) : TruncationRule::count(cfg.t0);
        s.s_factors = tsvd(s.sens.S, rule);
    });
    return s;
}

/// Clean synthetic data of one phantom on its domain.
struct CaseData {
    CaseSpec spec;
    Eigen::VectorXd sigma;
    DifferenceData clean;
    PixelTruth truth;
};

inline CaseData simulate_case(const DomainSetup& setup, const CaseSpec& spec, const ExperimentConfig& cfg) {
    CaseData c;
    c.spec = spec;
    staged("phantom " + spec.id, [&] {
        Phantom ph;
        ph.id = spec.id;
        ph.sigma0 = cfg.sigma0;
        ph.anomalies = spec.anomalies;
        ph.interior_margin = cfg.interior_margin;
        c.sigma = rasterize_phantom(ph, setup.mesh);
    });
    staged("forward " + spec.id, [&] {
        const NeumannSolver solver(setup.mesh, c.sigma);
        const auto measured = measure_voltages(solve_patterns(solver, setup.layout), setup.layout, spec.id);
        c.clean = difference_data(setup.reference_voltages, measured);
    });
    c.truth = project_truth(setup.grid, c.sigma, cfg.sigma0);
    return c;
}

struct MethodOutput {
    ReconstructionResult result;
    Metrics metrics;
};

/// One (phantom, noise level) run. All methods see the same `data`.
struct RunResult {
    std::string case_id;
    Domain domain = Domain::Disc;
    double noise_level = 0.0;
    std::uint64_t seed = 0;
    DifferenceData data;
    Eigen::VectorXd w;  // S-FM weights, zero when the data vanish
    double w_inside_mean = std::numeric_limits<double>::quiet_NaN();
    double w_outside_mean = std::numeric_limits<double>::quiet_NaN();
    std::vector<MethodOutput> outputs;
};

inline std::uint64_t run_seed(std::uint64_t base, std::size_t case_index, std::size_t noise_index) {
    return base + 1000003ULL * case_index + 7919ULL * noise_index;
}

inline std::string noise_tag(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "noise_%g", level);
    return buf;
}

namespace detail {

inline std::pair<double, double> inside_outside_means(const PixelTruth& truth, const Eigen::VectorXd& w) {
    double in = 0.0, out = 0.0;
    int n_in = 0, n_out = 0;
    for (Eigen::Index n = 0; n < w.size(); ++n) {
        if (truth.inside[static_cast<std::size_t>(n)]) {
            in += w[n];
            ++n_in;
        } else {
            out += w[n];
            ++n_out;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {n_in ? in / n_in : nan, n_out ? out / n_out : nan};
}

inline nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace detail

/// Runs every configured method on one noise realization of a case.
inline RunResult reconstruct_run(const DomainSetup& setup, const CaseData& c, double noise_level, std::uint64_t seed,
                                 const ExperimentConfig& cfg) {
    RunResult run;
    run.case_id = c.spec.id;
    run.domain = setup.domain;
    run.noise_level = noise_level;
    run.seed = seed;
    const std::string where = c.spec.id + "/" + noise_tag(noise_level);
    run.data = staged("noise " + where, [&] { return add_noise(c.clean, noise_level, seed); });
    const auto np = setup.sens.pixel_count();
    const bool zero_data = !(run.data.stacked.cwiseAbs().maxCoeff() > 0.0);

    run.w = Eigen::VectorXd::Zero(np);
    if (!zero_data && (cfg.wants("B") || cfg.wants("A") || cfg.wants("W1")))
        run.w = staged("sfm " + where, [&] { return sfm_index(setup.sens, run.data, cfg.eps_zeta).w; });
    if (!zero_data && !c.truth.empty())
        std::tie(run.w_inside_mean, run.w_outside_mean) = detail::inside_outside_means(c.truth, run.w);

    const auto finish = [&](ReconstructionResult r, bool image_metrics) {
        r.eps_zeta = cfg.eps_zeta;
        r.noise_level = noise_level;
        r.seed = seed;
        MethodOutput out{std::move(r), Metrics{}};
        if (image_metrics && !zero_data)
            out.metrics = evaluate(setup.grid, c.truth, out.result.delta_sigma, &setup.sens, &run.data);
        run.outputs.push_back(std::move(out));
    };
    const auto zero_result = [&](Method m) {
        ReconstructionResult r;
        r.delta_sigma = Eigen::VectorXd::Zero(np);
        r.method = m;
        return r;
    };

    for (const auto& name : cfg.methods) {
        if (name == "S") {
            finish(staged("recon S " + where, [&] { return reconstruct_S(setup.s_factors, setup.sens, run.data); }),
                   true);
        } else if (name == "B") {
            if (zero_data) {
                finish(zero_result(Method::B), true);
                continue;
            }
            finish(staged("recon B " + where,
                          [&] {
                              const double beta = cfg.beta ? *cfg.beta : default_beta(setup.s_factors, run.w);
                              return reconstruct_B(setup.sens, run.data, run.w, beta,
                                                   TruncationRule::relative(cfg.t1_rho));
                          }),
                   true);
        } else if (name == "A") {
            if (zero_data) {
                finish(zero_result(Method::A), true);
                continue;
            }
            finish(staged("recon A " + where,
                          [&] {
                              const auto t2 = select_t2(run.w, np, cfg.t2_rule);
                              return reconstruct_A(setup.s_factors, setup.sens, run.data, run.w, cfg.alpha,
                                                   TruncationRule::count(static_cast<int>(t2)));
                          }),
                   true);
        } else if (name == "W1") {
            ReconstructionResult r = zero_result(Method::W1);
            r.delta_sigma = run.w;
            finish(std::move(r), false);
        }
    }
    return run;
}

struct ExperimentResult {
    std::vector<RunResult> runs;
};

namespace detail {

/// Runs `count` tasks on up to `jobs` threads; results land in task order.
/// The first failure in task order is rethrown.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, jobs));
    if (threads == 1 || count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(threads, count); ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline void write_text(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
    io::write_file(path.string(), writer);
}

inline std::string format_metric(double v) { return std::isnan(v) ? "undefined" : io::format_double(v); }

inline void write_run_artifacts(const std::filesystem::path& dir, const DomainSetup& setup, const RunResult& run,
                                const ExperimentConfig& cfg) {
    std::filesystem::create_directories(dir);
    write_text(dir / "dV.txt", [&](std::ostream& o) { io::write_voltage_matrix(o, run.data.matrix, run.noise_level, run.seed); });
    for (const auto& out : run.outputs) {
        const std::string name(method_name(out.result.method));
        const auto& v = out.result.delta_sigma;
        write_text(dir / (name + ".csv"), [&](std::ostream& o) { io::write_pixel_csv(o, setup.grid, v, name); });
        const auto palette = out.result.method == Method::W1 ? Palette::fit(v, Palette::Kind::Linear)
                                                             : Palette::fit(v, Palette::Kind::Diverging);
        render_heatmap(setup.grid, v, palette, dir / (name + ".pgm"));
        nlohmann::ordered_json j;
        j["case"] = run.case_id;
        j["domain"] = domain_name(run.domain);
        j["method"] = name;
        j["truncation"] = out.result.truncation;
        j["alpha"] = out.result.alpha;
        j["beta"] = out.result.beta;
        j["eps_zeta"] = cfg.eps_zeta;
        j["noise_level"] = run.noise_level;
        j["seed"] = run.seed;
        j["pixels"] = setup.grid.size();
        j["metrics"] = {{"centroid_error", number_or_null(out.metrics.centroid_error)},
                        {"support_jaccard", number_or_null(out.metrics.support_jaccard)},
                        {"ringing_energy", number_or_null(out.metrics.ringing_energy)},
                        {"relative_data_misfit", number_or_null(out.metrics.relative_data_misfit)}};
        write_text(dir / (name + ".json"), [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    }
}

}  // namespace detail

/// Comparison table, one row per (phantom, noise level, method), in run order.
inline std::string summarize_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "case,domain,noise,method,truncation,centroid_error,support_jaccard,ringing_energy,relative_data_misfit,"
           "w_inside_mean,w_outside_mean\n";
    for (const auto& run : result.runs)
        for (const auto& m : run.outputs)
            out << run.case_id << ',' << domain_name(run.domain) << ',' << io::format_double(run.noise_level) << ','
                << method_name(m.result.method) << ',' << m.result.truncation << ','
                << detail::format_metric(m.metrics.centroid_error) << ','
                << detail::format_metric(m.metrics.support_jaccard) << ','
                << detail::format_metric(m.metrics.ringing_energy) << ','
                << detail::format_metric(m.metrics.relative_data_misfit) << ','
                << detail::format_metric(run.w_inside_mean) << ',' << detail::format_metric(run.w_outside_mean)
                << '\n';
    return out.str();
}

inline std::string summarize_text(const ExperimentResult& result) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %-9s %-6s %-6s %5s %10s %8s %8s %8s\n", "case", "domain", "noise", "method",
                  "t", "centroid", "jaccard", "ringing", "misfit");
    out << line;
    const auto cell = [](double v) {
        char b[32];
        if (std::isnan(v))
            std::snprintf(b, sizeof b, "%s", "-");
        else
            std::snprintf(b, sizeof b, "%.4f", v);
        return std::string(b);
    };
    for (const auto& run : result.runs)
        for (const auto& m : run.outputs) {
            std::snprintf(line, sizeof line, "%-6s %-9s %-6g %-6s %5ld %10s %8s %8s %8s\n", run.case_id.c_str(),
                          domain_name(run.domain).c_str(), run.noise_level,
                          std::string(method_name(m.result.method)).c_str(), static_cast<long>(m.result.truncation),
                          cell(m.metrics.centroid_error).c_str(), cell(m.metrics.support_jaccard).c_str(),
                          cell(m.metrics.ringing_energy).c_str(), cell(m.metrics.relative_data_misfit).c_str());
            out << line;
        }
    return out.str();
}

/// Full experiment: one forward setup per domain, one clean synthesis per
/// phantom, then one run per (phantom, noise level). Runs execute on
/// `cfg.jobs` threads; the result order is fixed by the configuration.
/// With a non-empty output directory every run writes its artifacts there,
/// alongside the resolved configuration and the summary tables.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    staged("config", [&] { cfg.validate(); });
    const auto cases = cfg.selected_cases();
    const std::filesystem::path root = cfg.output_dir;
    if (!cfg.output_dir.empty())
        staged("output", [&] {
            std::filesystem::create_directories(root);
            detail::write_text(root / "config.ini", [&](std::ostream& o) { write_config(o, cfg); });
        });

    std::map<Domain, DomainSetup> setups;
    for (const auto& c : cases)
        if (!setups.count(c.domain)) setups.emplace(c.domain, prepare_domain(cfg, c.domain));

    std::vector<CaseData> data(cases.size());
    detail::parallel_for(cases.size(), cfg.jobs,
                         [&](std::size_t i) { data[i] = simulate_case(setups.at(cases[i].domain), cases[i], cfg); });

    const std::size_t nl = cfg.noise_levels.size();
    ExperimentResult result;
    result.runs.resize(cases.size() * nl);
    detail::parallel_for(result.runs.size(), cfg.jobs, [&](std::size_t r) {
        const std::size_t ci = r / nl;
        const std::size_t li = r % nl;
        const auto& setup = setups.at(cases[ci].domain);
        result.runs[r] = reconstruct_run(setup, data[ci], cfg.noise_levels[li], run_seed(cfg.seed, ci, li), cfg);
        if (!cfg.output_dir.empty())
            staged("output", [&] {
                detail::write_run_artifacts(root / cases[ci].id / noise_tag(cfg.noise_levels[li]), setup,
                                            result.runs[r], cfg);
            });
    });

    if (!cfg.output_dir.empty())
        staged("output", [&] {
            for (std::size_t ci = 0; ci < cases.size(); ++ci) {
                const auto& setup = setups.at(cases[ci].domain);
                const auto dir = root / cases[ci].id;
                std::filesystem::create_directories(dir);
                detail::write_text(dir / "truth.csv", [&](std::ostream& o) {
                    io::write_pixel_csv(o, setup.grid, data[ci].truth.delta_sigma, "delta_sigma");
                });
                render_heatmap(setup.grid, data[ci].truth.delta_sigma,
                               Palette::fit(data[ci].truth.delta_sigma, Palette::Kind::Diverging), dir / "truth.pgm");
            }
            for (const auto& [domain, setup] : setups) {
                const auto dir = root / ("domain_" + domain_name(domain));
                std::filesystem::create_directories(dir);
                detail::write_text(dir / "mesh.txt", [&](std::ostream& o) { io::write_mesh(o, setup.mesh, setup.layout); });
                detail::write_text(dir / "pixels.txt", [&](std::ostream& o) { io::write_pixel_grid(o, setup.grid); });
            }
            detail::write_text(root / "summary.csv", [&](std::ostream& o) { o << summarize_csv(result); });
            detail::write_text(root / "summary.txt", [&](std::ostream& o) { o << summarize_text(result); });
        });
    return result;
}

}  // namespace eitsfm

#endif  // EITSFM_EXPERIMENT_HPP
