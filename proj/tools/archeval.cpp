// archeval: measure ML serving systems and compare architecture candidates.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <pthread.h>

#include "CLI11.hpp"
#include "archeval/campaign.hpp"
#include "archeval/config.hpp"
#include "archeval/mock.hpp"
#include "archeval/nrmt.hpp"
#include "archeval/report.hpp"
#include "archeval/sysload.hpp"

using namespace archeval;
namespace fs = std::filesystem;

namespace {

void log_line(const std::string& s) { std::cerr << s << std::endl; }

// Blocks SIGINT/SIGTERM in this thread (and threads started afterwards) so
// they can be collected with wait_for_signal.
sigset_t block_termination_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

int wait_for_signal(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
    return sig;
}

const SystemProfile& pick_system(const CampaignConfig& cfg, const std::string& name) {
    if (!name.empty()) return cfg.system(name);
    if (!cfg.baseline.empty()) return cfg.baseline_profile();
    if (cfg.systems.size() == 1) return cfg.systems.front();
    throw InvalidArgument("config has several systems; choose one with --system");
}

std::vector<double> parse_load_triple(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw InvalidArgument("--load expects three comma-separated numbers, got '" + s + "'");
        }
    }
    if (v.size() != 3) throw InvalidArgument("--load expects three comma-separated numbers");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantitative scalability and performance evaluation of ML serving systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "archeval 1.0.0");

    std::string config_path, system_name, out_dir, record_dir, format = "text";
    std::string bind = "0.0.0.0:9464";
    std::string grpc_bind;
    double step = 0.05, span = 0.20;

    auto* ramp_cmd = app.add_subcommand("ramp", "Run a concurrency ramp and print it as JSON");
    ramp_cmd->add_option("--config", config_path, "Campaign config (TOML)")->required();
    ramp_cmd->add_option("--system", system_name, "System to ramp (default: baseline)");

    auto* nrmt_cmd = app.add_subcommand("nrmt", "Run a ramp and print the detected NRMT as JSON");
    nrmt_cmd->add_option("--config", config_path, "Campaign config (TOML)")->required();
    nrmt_cmd->add_option("--system", system_name, "System to ramp (default: baseline)");

    auto* agent_cmd = app.add_subcommand("agent", "Serve this host's load averages over HTTP");
    agent_cmd->add_option("--bind", bind, "host:port to listen on")->capture_default_str();

    auto* measure_cmd = app.add_subcommand("measure", "Measure one system and persist a record");
    measure_cmd->add_option("--config", config_path, "Campaign config (TOML)")->required();
    measure_cmd->add_option("--system", system_name, "System to measure")->required();
    measure_cmd->add_option("--out", out_dir, "Record directory")->required();

    auto* evaluate_cmd =
        app.add_subcommand("evaluate", "Measure baseline and candidates, decide acceptance");
    evaluate_cmd->add_option("--config", config_path, "Campaign config (TOML)")->required();
    evaluate_cmd->add_option("--out", out_dir, "Record directory")->required();

    auto* replay_cmd = app.add_subcommand("replay", "Recompute a record from its raw files");
    replay_cmd->add_option("--record", record_dir, "Record directory")->required();

    auto* report_cmd = app.add_subcommand("report", "Render a comparison table");
    report_cmd->add_option("--record", record_dir, "Record directory")->required();
    report_cmd->add_option("--format", format, "text, csv or json")
        ->check(CLI::IsMember({"text", "csv", "json"}))
        ->capture_default_str();

    auto* sens_cmd = app.add_subcommand("sensitivity", "Sensitivity of SC and PC for one system");
    sens_cmd->add_option("--record", record_dir, "Record directory")->required();
    sens_cmd->add_option("--system", system_name, "System in the record")->required();
    std::string sens_format = "csv";
    sens_cmd->add_option("--format", sens_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sens_cmd->add_option("--step", step, "Grid step as a fraction")->capture_default_str();
    sens_cmd->add_option("--span", span, "Largest change as a fraction")->capture_default_str();

    auto* mock_cmd = app.add_subcommand("mock-serve", "Run the mock inference target");
    MockProfile mock;
    std::string load = "0,0,0";
    std::string mock_bind = "127.0.0.1:8080";
    mock_cmd->add_option("--base-delay-ms", mock.base_delay_ms)->capture_default_str();
    mock_cmd->add_option("--jitter-ms", mock.jitter_ms)->capture_default_str();
    mock_cmd->add_option("--capacity", mock.capacity)->capture_default_str();
    mock_cmd->add_option("--overload-slope-ms", mock.overload_slope_ms)->capture_default_str();
    mock_cmd->add_option("--load", load, "Emulated 1,5,15-minute load averages")
        ->capture_default_str();
    mock_cmd->add_option("--seed", mock.seed)->capture_default_str();
    mock_cmd->add_option("--bind", mock_bind, "HTTP host:port")->capture_default_str();
    mock_cmd->add_option("--grpc-bind", grpc_bind, "Also serve gRPC (h2c) on host:port");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ramp_cmd || *nrmt_cmd) {
            const auto cfg = load_campaign_config(config_path);
            const auto& p = pick_system(cfg, system_name);
            LoadHarness h(p.target);
            const auto ramp = h.run_ramp(p.ramp, [](const LevelObservation& l) {
                std::ostringstream s;
                s << "c=" << l.concurrency << " median ";
                if (l.response_time_median_ms)
                    s << *l.response_time_median_ms << " ms";
                else
                    s << "n/a";
                s << " ok " << l.success_count << "/" << l.samples.size();
                log_line(s.str());
            });
            if (*ramp_cmd) {
                std::cout << json(ramp).dump(1) << '\n';
            } else {
                std::cout << json(detect_nrmt(ramp, p.nrmt)).dump(2) << '\n';
            }
            return 0;
        }

        if (*agent_cmd) {
            const auto signals = block_termination_signals();
            LoadAgent agent;
            const auto addr = parse_bind(bind);
            const int port = agent.start(addr);
            log_line("load agent listening on " + addr.host + ":" + std::to_string(port));
            wait_for_signal(signals);
            agent.stop();
            return 0;
        }

        if (*mock_cmd) {
            const auto l = parse_load_triple(load);
            mock.emulated_load = {l[0], l[1], l[2]};
            const auto signals = block_termination_signals();
            MockServer server(mock);
            std::optional<BindAddress> g;
            if (!grpc_bind.empty()) g = parse_bind(grpc_bind);
            server.start(parse_bind(mock_bind), g);
            log_line("mock target on " + server.base_url() + " (POST /predict, GET /loadavg, GET /stats)");
            if (g) log_line("gRPC unary on port " + std::to_string(server.grpc_port()));
            wait_for_signal(signals);
            server.stop();
            return 0;
        }

        if (*measure_cmd) {
            const auto cfg = load_campaign_config(config_path);
            const auto& p = cfg.system(system_name);
            const auto rec = run_campaign(cfg.name, p, {}, live_measurer(log_line), out_dir);
            std::cout << emit_comparison(rec, ReportFormat::text);
            log_line("record written to " + out_dir);
            return 0;
        }

        if (*evaluate_cmd) {
            const auto cfg = load_campaign_config(config_path);
            const auto rec = run_campaign(cfg, live_measurer(log_line), out_dir);
            std::cout << emit_comparison(rec, ReportFormat::text);
            log_line("record written to " + out_dir);
            return 0;
        }

        if (*replay_cmd) {
            const auto r = replay_from_record(record_dir);
            if (r.identical()) {
                std::cout << "replay identical: every metric and the result list match\n";
                return 0;
            }
            std::cout << "replay differs from the stored record:\n";
            for (const auto& m : r.mismatches) std::cout << "  " << m << '\n';
            return 1;
        }

        if (*report_cmd) {
            std::cout << emit_comparison(load_record(record_dir), report_format_from_string(format));
            return 0;
        }

        if (*sens_cmd) {
            const auto rec = load_record(record_dir);
            const auto points = sensitivity_scan(system_metrics(rec, system_name), step, span);
            std::cout << emit_sensitivity(points, report_format_from_string(sens_format));
            return 0;
        }
    } catch (const StageError& e) {
        std::cerr << "archeval: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "archeval: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
