#pragma once

// Campaign configuration (TOML).
//
//   [campaign]
//   name = "architecture review"
//   rtm_requests = 1000
//
//   [systems."System A"]
//   baseline = true
//   [systems."System A".target]   protocol, endpoint, http_method, headers,
//                                 body, body_file, timeout_s, tls,
//                                 grpc_service, grpc_method
//   [systems."System A".hsx]      time_minutes, ease, cost_keur_month
//   [systems."System A".probe]    source, agent_url, sample_interval_s, duration_s
//   [systems."System A".ramp]     start, max, step, rounds_per_level,
//                                 warmup_requests, epsilon, confirm, method
//
// Candidates are evaluated in the order they appear in the file.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "archeval/error.hpp"
#include "archeval/harness.hpp"
#include "archeval/json_io.hpp"
#include "archeval/metrics.hpp"
#include "archeval/nrmt.hpp"
#include "archeval/sysload.hpp"
#include "archeval/target.hpp"
#include "toml.hpp"

namespace archeval {

struct SystemProfile {
    std::string name;
    TargetSpec target;
    HsxInputs hsx_inputs;
    ProbeConfig probe;
    RampConfig ramp;
    NrmtOptions nrmt;
    std::int64_t rtm_requests = 1000;

    bool operator==(const SystemProfile&) const = default;
};

inline void validate(const SystemProfile& p) {
    if (p.name.empty()) throw InvalidArgument("system name is empty");
    auto tagged = [&](auto&& fn) {
        try {
            fn();
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("system '" + p.name + "': " + e.what());
        }
    };
    tagged([&] { validate(p.target); });
    tagged([&] { validate(p.hsx_inputs); });
    tagged([&] { validate(p.probe); });
    tagged([&] { validate(p.ramp); });
    if (p.rtm_requests < 1)
        throw InvalidArgument("system '" + p.name + "': rtm_requests must be positive");
}

inline void to_json(json& j, const SystemProfile& v) {
    j = {{"name", v.name},   {"target", v.target}, {"hsx_inputs", v.hsx_inputs},
         {"probe", v.probe}, {"ramp", v.ramp},     {"nrmt", v.nrmt},
         {"rtm_requests", v.rtm_requests}};
}
inline void from_json(const json& j, SystemProfile& v) {
    j.at("name").get_to(v.name);
    j.at("target").get_to(v.target);
    j.at("hsx_inputs").get_to(v.hsx_inputs);
    j.at("probe").get_to(v.probe);
    j.at("ramp").get_to(v.ramp);
    j.at("nrmt").get_to(v.nrmt);
    j.at("rtm_requests").get_to(v.rtm_requests);
}

struct CampaignConfig {
    std::string name = "campaign";
    std::int64_t rtm_requests = 1000;
    std::vector<SystemProfile> systems;  // file order
    std::string baseline;                // empty when none is marked

    const SystemProfile& system(const std::string& n) const {
        for (const auto& s : systems)
            if (s.name == n) return s;
        throw InvalidArgument("no system named '" + n + "' in the config");
    }

    const SystemProfile& baseline_profile() const {
        if (baseline.empty()) throw InvalidArgument("no system is marked baseline = true");
        return system(baseline);
    }

    std::vector<SystemProfile> candidates() const {
        std::vector<SystemProfile> out;
        for (const auto& s : systems)
            if (s.name != baseline) out.push_back(s);
        return out;
    }
};

namespace detail {

class TomlReader {
public:
    explicit TomlReader(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

    CampaignConfig read(const toml::table& root) {
        CampaignConfig cfg;
        check_keys(root, "", {"campaign", "systems"});
        if (const auto* c = root["campaign"].as_table()) {
            check_keys(*c, "campaign", {"name", "rtm_requests"});
            if (auto n = (*c)["name"]) cfg.name = str(n, "campaign.name");
            if (auto n = (*c)["rtm_requests"]) cfg.rtm_requests = integer(n, "campaign.rtm_requests");
        }
        const auto* systems = root["systems"].as_table();
        if (!systems || systems->empty()) throw InvalidArgument("config defines no [systems.<name>]");

        std::vector<std::pair<std::uint32_t, std::string>> order;
        for (const auto& [key, node] : *systems)
            order.emplace_back(node.source().begin.line, std::string(key.str()));
        std::sort(order.begin(), order.end());

        for (const auto& [line, name] : order) {
            const auto* t = (*systems)[name].as_table();
            if (!t) throw InvalidArgument("systems." + name + " must be a table");
            bool is_baseline = false;
            cfg.systems.push_back(read_system(name, *t, cfg.rtm_requests, is_baseline));
            if (is_baseline) {
                if (!cfg.baseline.empty())
                    throw InvalidArgument("both '" + cfg.baseline + "' and '" + name +
                                          "' are marked baseline");
                cfg.baseline = name;
            }
        }
        return cfg;
    }

private:
    SystemProfile read_system(const std::string& name, const toml::table& t, std::int64_t n_r,
                              bool& is_baseline) {
        const std::string at = "systems." + name;
        check_keys(t, at, {"baseline", "target", "hsx", "probe", "ramp"});
        SystemProfile p;
        p.name = name;
        p.rtm_requests = n_r;
        if (auto b = t["baseline"]) is_baseline = boolean(b, at + ".baseline");

        const auto* target = t["target"].as_table();
        if (!target) throw InvalidArgument(at + ".target is required");
        read_target(*target, at + ".target", p.target);

        const auto* hsx = t["hsx"].as_table();
        if (!hsx) throw InvalidArgument(at + ".hsx is required (time_minutes, ease, cost_keur_month)");
        check_keys(*hsx, at + ".hsx", {"time_minutes", "ease", "cost_keur_month"});
        p.hsx_inputs.time_minutes = number(required(*hsx, "time_minutes", at + ".hsx"), at + ".hsx.time_minutes");
        p.hsx_inputs.ease = static_cast<int>(integer(required(*hsx, "ease", at + ".hsx"), at + ".hsx.ease"));
        p.hsx_inputs.cost_keur_month =
            number(required(*hsx, "cost_keur_month", at + ".hsx"), at + ".hsx.cost_keur_month");

        if (const auto* probe = t["probe"].as_table()) {
            const std::string pa = at + ".probe";
            check_keys(*probe, pa, {"source", "agent_url", "sample_interval_s", "duration_s"});
            if (auto v = (*probe)["source"]) p.probe.source = probe_source_from_string(str(v, pa + ".source"));
            if (auto v = (*probe)["agent_url"]) {
                if (const auto* arr = v.as_array()) {
                    for (const auto& u : *arr) p.probe.agent_urls.push_back(str(toml::node_view<const toml::node>(u), pa + ".agent_url"));
                } else {
                    p.probe.agent_urls.push_back(str(v, pa + ".agent_url"));
                }
            }
            if (auto v = (*probe)["sample_interval_s"]) p.probe.sample_interval_s = number(v, pa + ".sample_interval_s");
            if (auto v = (*probe)["duration_s"]) p.probe.duration_s = number(v, pa + ".duration_s");
        }

        if (const auto* ramp = t["ramp"].as_table()) {
            const std::string ra = at + ".ramp";
            check_keys(*ramp, ra, {"start", "max", "step", "rounds_per_level", "warmup_requests",
                                   "epsilon", "confirm", "method"});
            if (auto v = (*ramp)["start"]) p.ramp.start = integer(v, ra + ".start");
            if (auto v = (*ramp)["max"]) p.ramp.max = integer(v, ra + ".max");
            if (auto v = (*ramp)["step"]) p.ramp.step = integer(v, ra + ".step");
            if (auto v = (*ramp)["rounds_per_level"]) p.ramp.rounds_per_level = integer(v, ra + ".rounds_per_level");
            if (auto v = (*ramp)["warmup_requests"]) p.ramp.warmup_requests = integer(v, ra + ".warmup_requests");
            if (auto v = (*ramp)["epsilon"]) p.nrmt.epsilon = number(v, ra + ".epsilon");
            if (auto v = (*ramp)["confirm"]) p.nrmt.confirm = integer(v, ra + ".confirm");
            if (auto v = (*ramp)["method"]) p.nrmt.method = knee_method_from_string(str(v, ra + ".method"));
        }
        if (!(p.nrmt.epsilon > 0 && p.nrmt.epsilon < 1))
            throw InvalidArgument(at + ".ramp.epsilon must lie in (0, 1)");
        if (p.nrmt.confirm < 1) throw InvalidArgument(at + ".ramp.confirm must be at least 1");
        validate(p);
        return p;
    }

    void read_target(const toml::table& t, const std::string& at, TargetSpec& out) {
        check_keys(t, at, {"protocol", "endpoint", "http_method", "headers", "body", "body_file",
                           "timeout_s", "tls", "grpc_service", "grpc_method"});
        if (auto v = t["protocol"]) out.protocol = protocol_from_string(str(v, at + ".protocol"));
        out.endpoint = str(required(t, "endpoint", at), at + ".endpoint");
        if (auto v = t["http_method"]) out.http_method = str(v, at + ".http_method");
        if (auto v = t["headers"]) {
            const auto* h = v.as_table();
            if (!h) throw InvalidArgument(at + ".headers must be a table of strings");
            for (const auto& [k, hv] : *h)
                out.headers.emplace_back(std::string(k.str()),
                                         str(toml::node_view<const toml::node>(hv), at + ".headers"));
        }
        if (t["body"] && t["body_file"])
            throw InvalidArgument(at + ": give either body or body_file, not both");
        if (auto v = t["body"]) out.body = str(v, at + ".body");
        if (auto v = t["body_file"]) {
            out.body_file = str(v, at + ".body_file");
            out.body = read_body(out.body_file);
        }
        if (auto v = t["timeout_s"]) out.timeout_s = number(v, at + ".timeout_s");
        if (auto v = t["tls"]) out.tls = boolean(v, at + ".tls");
        if (auto v = t["grpc_service"]) out.grpc_service = str(v, at + ".grpc_service");
        if (auto v = t["grpc_method"]) out.grpc_method = str(v, at + ".grpc_method");
    }

    std::string read_body(const std::string& file) const {
        std::filesystem::path p(file);
        if (p.is_relative()) p = base_dir_ / p;
        std::ifstream in(p, std::ios::binary);
        if (!in) throw FileError(p.string(), "cannot open body_file");
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    template <class View>
    static std::string str(View v, const std::string& at) {
        if (auto s = v.template value<std::string>(); s && v.is_string()) return *s;
        throw InvalidArgument(at + " must be a string");
    }
    template <class View>
    static std::int64_t integer(View v, const std::string& at) {
        if (v.is_integer()) return *v.template value<std::int64_t>();
        throw InvalidArgument(at + " must be an integer");
    }
    template <class View>
    static double number(View v, const std::string& at) {
        if (v.is_number()) return *v.template value<double>();
        throw InvalidArgument(at + " must be a number");
    }
    template <class View>
    static bool boolean(View v, const std::string& at) {
        if (v.is_boolean()) return *v.template value<bool>();
        throw InvalidArgument(at + " must be true or false");
    }

    static toml::node_view<const toml::node> required(const toml::table& t, const char* key,
                                                     const std::string& at) {
        auto v = t[key];
        if (!v) throw InvalidArgument(at + "." + key + " is required");
        return v;
    }

    static void check_keys(const toml::table& t, const std::string& at,
                           std::initializer_list<std::string_view> allowed) {
        for (const auto& [k, v] : t) {
            if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end())
                throw InvalidArgument("unknown key '" + std::string(k.str()) + "'" +
                                      (at.empty() ? std::string() : " in [" + at + "]"));
        }
    }

    std::filesystem::path base_dir_;
};

}  // namespace detail

/// Parses config text. Relative body_file paths resolve against `base_dir`.
inline CampaignConfig parse_campaign_config(std::string_view text,
                                            const std::filesystem::path& base_dir = ".",
                                            const std::string& source_name = "config") {
    toml::table root;
    try {
        root = toml::parse(text, source_name);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "line " << e.source().begin.line << ": " << e.description();
        throw FileError(source_name, msg.str());
    }
    return detail::TomlReader(base_dir).read(root);
}

inline CampaignConfig load_campaign_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path.string(), "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_campaign_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path(),
                                     path.string());
    } catch (const FileError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw FileError(path.string(), e.what());
    }
}

}  // namespace archeval
