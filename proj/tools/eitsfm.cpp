// Command-line driver for the difference-EIT pipeline.
#include "eitsfm/config.hpp"
#include "eitsfm/experiment.hpp"
#include "eitsfm/heatmap.hpp"
#include "eitsfm/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace eitsfm;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string output = ".";
    std::optional<std::uint64_t> seed;
    std::string methods;
    std::string domain;
    std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_path, "experiment configuration (INI)")->check(CLI::ExistingFile);
    cmd->add_option("-o,--output", o.output, "output directory");
    cmd->add_option("--seed", o.seed, "base noise seed");
}

ExperimentConfig load(const CommonOptions& o) {
    return staged("config", [&] {
        ExperimentConfig cfg;
        if (!o.config_path.empty()) {
            std::ifstream in(o.config_path);
            if (!in) throw std::runtime_error("cannot open " + o.config_path);
            cfg = parse_config(in);
        }
        if (o.seed) cfg.seed = *o.seed;
        if (!o.methods.empty()) cfg.methods = detail::split_list(o.methods);
        if (o.jobs) cfg.jobs = *o.jobs;
        cfg.output_dir = o.output;
        cfg.validate();
        return cfg;
    });
}

Domain pick_domain(const CommonOptions& o) {
    return staged("config", [&] { return parse_domain(o.domain.empty() ? "disc" : o.domain); });
}

CaseSpec find_case(const ExperimentConfig& cfg, const std::string& id);

/// Without --domain, case-driven commands run on the domain of their case.
Domain pick_domain(const CommonOptions& o, const ExperimentConfig& cfg, const std::string& data_path,
                   const std::string& case_id) {
    if (o.domain.empty() && data_path.empty()) return find_case(cfg, case_id).domain;
    return pick_domain(o);
}

fs::path prepare_output(const std::string& dir) {
    return staged("output", [&] {
        fs::create_directories(dir);
        return fs::path(dir);
    });
}

CaseSpec find_case(const ExperimentConfig& cfg, const std::string& id) {
    return staged("config", [&] {
        ExperimentConfig probe = cfg;
        probe.cases = {id};
        return probe.selected_cases().front();
    });
}

/// Difference data either read from a file or synthesized for a phantom case.
DifferenceData obtain_data(const ExperimentConfig& cfg, const DomainSetup& setup, const std::string& data_path,
                           const std::string& case_id, double noise) {
    if (!data_path.empty())
        return staged("data", [&] {
            std::ifstream in(data_path);
            if (!in) throw std::runtime_error("cannot open " + data_path);
            auto d = io::read_voltage_matrix(in);
            if (d.electrode_count() != setup.layout.count())
                throw std::runtime_error("data has " + std::to_string(d.electrode_count()) + " electrodes, domain has " +
                                         std::to_string(setup.layout.count()));
            return d;
        });
    const CaseSpec spec = find_case(cfg, case_id);
    if (spec.domain != setup.domain)
        throw StageError("config", "case " + case_id + " lives on the " + domain_name(spec.domain) + " domain");
    const CaseData c = simulate_case(setup, spec, cfg);
    return staged("noise", [&] { return add_noise(c.clean, noise, cfg.seed); });
}

void write_out(const fs::path& path, const std::function<void(std::ostream&)>& writer, bool binary = false) {
    staged("output", [&] { io::write_file(path.string(), writer, binary); });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Difference EIT with sensitivity-based factorization weights"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string case_id = "a";
    std::string data_path;
    std::string format = "text";
    double noise = 0.0;

    auto* mesh_cmd = app.add_subcommand("mesh", "build a domain mesh, electrodes and pixel grid");
    add_common(mesh_cmd, common);
    mesh_cmd->add_option("-d,--domain", common.domain, "disc or deformed");

    auto* forward_cmd = app.add_subcommand("forward", "simulate difference data for a phantom case");
    add_common(forward_cmd, common);
    forward_cmd->add_option("--case", case_id, "phantom case id");
    forward_cmd->add_option("--noise", noise, "relative noise level")->check(CLI::NonNegativeNumber);

    auto* sense_cmd = app.add_subcommand("sense", "assemble the sensitivity matrix");
    add_common(sense_cmd, common);
    sense_cmd->add_option("-d,--domain", common.domain, "disc or deformed");
    sense_cmd->add_option("--format", format, "text or binary")->check(CLI::IsMember({"text", "binary"}));

    auto* sfm_cmd = app.add_subcommand("sfm", "compute the S-FM weights");
    add_common(sfm_cmd, common);
    sfm_cmd->add_option("-d,--domain", common.domain, "disc or deformed");
    sfm_cmd->add_option("--data", data_path, "difference data file (overrides --case)");
    sfm_cmd->add_option("--case", case_id, "phantom case id");
    sfm_cmd->add_option("--noise", noise, "relative noise level")->check(CLI::NonNegativeNumber);

    auto* recon_cmd = app.add_subcommand("recon", "reconstruct with the selected methods");
    add_common(recon_cmd, common);
    recon_cmd->add_option("-d,--domain", common.domain, "disc or deformed");
    recon_cmd->add_option("--data", data_path, "difference data file (overrides --case)");
    recon_cmd->add_option("--case", case_id, "phantom case id");
    recon_cmd->add_option("--noise", noise, "relative noise level")->check(CLI::NonNegativeNumber);
    recon_cmd->add_option("-m,--methods", common.methods, "comma-separated subset of S,B,A,W1");

    auto* exp_cmd = app.add_subcommand("experiment", "run the full phantom suite");
    add_common(exp_cmd, common);
    exp_cmd->add_option("-m,--methods", common.methods, "comma-separated subset of S,B,A,W1");
    exp_cmd->add_option("-j,--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (mesh_cmd->parsed()) {
            const auto cfg = load(common);
            const Domain domain = pick_domain(common);
            DomainSetup s;
            staged("mesh", [&] {
                const bool disc = domain == Domain::Disc;
                s.mesh = build_star_mesh(domain_radius(cfg, domain), disc ? cfg.disc_elements : cfg.deformed_elements);
                validate_mesh(s.mesh);
                s.layout = place_electrodes(s.mesh, cfg.electrodes);
                s.grid = build_pixel_grid(s.mesh, disc ? cfg.disc_pixels : cfg.deformed_pixels,
                                          cfg.margin_edges * s.mesh.mean_boundary_edge());
            });
            const auto dir = prepare_output(common.output);
            write_out(dir / "mesh.txt", [&](std::ostream& o) { io::write_mesh(o, s.mesh, s.layout); });
            write_out(dir / "pixels.txt", [&](std::ostream& o) { io::write_pixel_grid(o, s.grid); });
            std::cout << domain_name(domain) << ": " << s.mesh.node_count() << " nodes, " << s.mesh.triangle_count()
                      << " triangles, " << s.layout.count() << " electrodes, " << s.grid.size() << " pixels\n";
        } else if (forward_cmd->parsed()) {
            const auto cfg = load(common);
            const CaseSpec spec = find_case(cfg, case_id);
            const auto setup = prepare_domain(cfg, spec.domain);
            const CaseData c = simulate_case(setup, spec, cfg);
            const auto data = staged("noise", [&] { return add_noise(c.clean, noise, cfg.seed); });
            const auto dir = prepare_output(common.output);
            write_out(dir / "dV.txt",
                      [&](std::ostream& o) { io::write_voltage_matrix(o, data.matrix, data.noise_level, data.seed); });
            write_out(dir / "truth.csv",
                      [&](std::ostream& o) { io::write_pixel_csv(o, setup.grid, c.truth.delta_sigma, "delta_sigma"); });
            std::cout << "case " << spec.id << " (" << domain_name(spec.domain) << "): max |dV| "
                      << data.stacked.cwiseAbs().maxCoeff() << '\n';
        } else if (sense_cmd->parsed()) {
            const auto cfg = load(common);
            const auto setup = prepare_domain(cfg, pick_domain(common));
            const auto dir = prepare_output(common.output);
            if (format == "binary")
                write_out(dir / "S.sens", [&](std::ostream& o) { io::write_matrix_binary(o, setup.sens.S); }, true);
            else
                write_out(dir / "S.txt", [&](std::ostream& o) { io::write_matrix_text(o, setup.sens.S); });
            write_out(dir / "singular_values.txt", [&](std::ostream& o) {
                for (Eigen::Index t = 0; t < setup.s_factors.singular_values.size(); ++t)
                    o << io::format_double(setup.s_factors.singular_values[t]) << '\n';
            });
            std::cout << "S: " << setup.sens.S.rows() << " x " << setup.sens.S.cols() << ", rank "
                      << setup.s_factors.rank << ", t0 " << setup.s_factors.truncation << '\n';
        } else if (sfm_cmd->parsed()) {
            const auto cfg = load(common);
            const auto setup = prepare_domain(cfg, pick_domain(common, cfg, data_path, case_id));
            const auto data = obtain_data(cfg, setup, data_path, case_id, noise);
            const auto field = staged("sfm", [&] { return sfm_index(setup.sens, data, cfg.eps_zeta); });
            const auto dir = prepare_output(common.output);
            write_out(dir / "W1.csv", [&](std::ostream& o) { io::write_pixel_csv(o, setup.grid, field.w, "w"); });
            write_out(dir / "zeta.txt", [&](std::ostream& o) { io::write_matrix_text(o, field.zeta); });
            staged("output", [&] {
                render_heatmap(setup.grid, field.w, Palette::fit(field.w, Palette::Kind::Linear), dir / "W1.pgm");
            });
            std::cout << "w in [" << field.w.minCoeff() << ", " << field.w.maxCoeff() << "]\n";
        } else if (recon_cmd->parsed()) {
            const auto cfg = load(common);
            const auto setup = prepare_domain(cfg, pick_domain(common, cfg, data_path, case_id));
            RunResult run;
            if (data_path.empty()) {
                const CaseSpec spec = find_case(cfg, case_id);
                if (spec.domain != setup.domain)
                    throw StageError("config", "case " + case_id + " lives on the " + domain_name(spec.domain) + " domain");
                const CaseData c = simulate_case(setup, spec, cfg);
                run = reconstruct_run(setup, c, noise, cfg.seed, cfg);
            } else {
                // External data carry their own noise; no truth, so image metrics stay undefined.
                CaseData c;
                c.spec.id = fs::path(data_path).stem().string();
                c.spec.domain = setup.domain;
                c.clean = obtain_data(cfg, setup, data_path, case_id, noise);
                c.truth.delta_sigma = Eigen::VectorXd::Zero(setup.sens.pixel_count());
                c.truth.inside.assign(setup.grid.size(), 0);
                run = reconstruct_run(setup, c, 0.0, c.clean.seed, cfg);
                run.noise_level = c.clean.noise_level;
                for (auto& out : run.outputs) out.result.noise_level = c.clean.noise_level;
            }
            const auto dir = prepare_output(common.output);
            staged("output", [&] { detail::write_run_artifacts(dir, setup, run, cfg); });
            ExperimentResult r;
            r.runs.push_back(run);
            std::cout << summarize_text(r);
        } else if (exp_cmd->parsed()) {
            const auto cfg = load(common);
            const auto result = run_experiment(cfg);
            std::cout << summarize_text(result);
        }
    } catch (const StageError& e) {
        std::cerr << "error in " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
