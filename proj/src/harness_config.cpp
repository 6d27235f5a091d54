#include <fstream>
#include <set>
#include <sstream>

#include "irs2d/harness.hpp"
#include "json.hpp"

namespace irs2d {

namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& j, const std::string& key)
{
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

Index get_count(const json& j, const std::string& key)
{
    const auto v = get_as<long long>(j, key);
    if (v < 1) {
        throw ConfigError("config key '" + key + "' must be >= 1");
    }
    return static_cast<Index>(v);
}

void apply_array(const json& j, ArrayConfig& a)
{
    if (!j.is_object()) {
        throw ConfigError("config key 'array' must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        const std::string path = "array." + key;
        if (key == "My") a.My = get_count(value, path);
        else if (key == "Mz") a.Mz = get_count(value, path);
        else if (key == "Qy") a.Qy = get_count(value, path);
        else if (key == "Qz") a.Qz = get_count(value, path);
        else if (key == "Ny") a.Ny = get_count(value, path);
        else if (key == "Nz") a.Nz = get_count(value, path);
        else throw ConfigError("unknown config key '" + path + "'");
    }
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text, ExperimentConfig cfg)
{
    json root;
    try {
        root = json::parse(json_text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config root must be an object");
    }

    for (const auto& [key, value] : root.items()) {
        if (key == "array") {
            apply_array(value, cfg.array);
        } else if (key == "snr_db") {
            cfg.snr_db = get_as<std::vector<double>>(value, key);
        } else if (key == "trials") {
            cfg.trials = static_cast<int>(get_count(value, key));
        } else if (key == "methods") {
            cfg.methods.clear();
            for (const auto& name : get_as<std::vector<std::string>>(value, key)) {
                try {
                    cfg.methods.push_back(parse_method(name));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            }
        } else if (key == "metrics") {
            cfg.metrics.clear();
            for (const auto& name : get_as<std::vector<std::string>>(value, key)) {
                try {
                    cfg.metrics.push_back(parse_metric(name));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            }
        } else if (key == "irs_sizes") {
            std::vector<Index> sizes;
            for (const auto& n : get_as<std::vector<json>>(value, key)) {
                sizes.push_back(get_count(n, key));
            }
            cfg.irs_sizes = sizes;
        } else if (key == "irs_sweep_snr_db") {
            cfg.irs_sweep_snr_db = get_as<double>(value, key);
        } else if (key == "seed") {
            cfg.seed = get_as<std::uint64_t>(value, key);
        } else if (key == "out_dir") {
            cfg.out_dir = get_as<std::string>(value, key);
        } else if (key == "plot_script") {
            cfg.plot_script = get_as<bool>(value, key);
        } else if (key == "transmit_power") {
            cfg.transmit_power = get_as<double>(value, key);
        } else if (key == "irs_convention") {
            const auto v = get_as<std::string>(value, key);
            if (v == "orthonormal") {
                cfg.convention = IrsConvention::Orthonormal;
            } else if (v == "unit_modulus") {
                cfg.convention = IrsConvention::UnitModulus;
            } else {
                throw ConfigError("irs_convention must be 'orthonormal' or 'unit_modulus'");
            }
        } else if (key == "grid_points") {
            cfg.estimator.grid.points = get_count(value, key);
        } else if (key == "grid_refine") {
            cfg.estimator.grid.refine = get_as<bool>(value, key);
        } else if (key == "grid_tolerance") {
            cfg.estimator.grid.tolerance = get_as<double>(value, key);
        } else if (key == "hosvd_refinement_sweeps") {
            cfg.estimator.hosvd.refinement_sweeps = get_as<int>(value, key);
        } else if (key == "noiseless") {
            cfg.noiseless = get_as<bool>(value, key);
        } else if (key == "crlb") {
            cfg.crlb = get_as<bool>(value, key);
        } else if (key == "crlb_scale_by_training_energy") {
            cfg.crlb_scale_by_training_energy = get_as<bool>(value, key);
        } else if (key == "threads") {
            cfg.threads = get_as<unsigned>(value, key);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, ExperimentConfig base)
{
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return parse_experiment_config(ss.str(), std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace irs2d
