#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drlab/pmf.hpp"
#include "drlab/tail_family.hpp"

namespace dr {

// Parsed form of the run configuration document:
// {
//   "model": {
//     "nu": {"2": 1.0},
//     "y0": {"2": 1.0} | "family": {"kind": "...", "theta"/"alpha": ..,
//                                    "m": .., "k_max": ..},
//     "p": 0.2 | "p_grid": [..] | {"start":.., "ratio":.., "count":..}
//   },
//   "run": { subcommand-specific knobs }
// }
struct RunConfig {
    OffspringLaw nu;
    std::optional<LatticePmf> y0;
    std::optional<TailFamily> family;
    std::optional<double> p;
    std::vector<double> p_grid;
    nlohmann::json* run = nullptr;  // borrowed view into `doc`
    std::shared_ptr<nlohmann::json> doc;

    // ModelSpec at a given p (family realized if present).
    ModelSpec spec_at(double p_value) const;
    double single_p() const;  // requires "p"

    double run_number(const std::string& key, double fallback) const;
    int run_int(const std::string& key, int fallback) const;
    std::string run_string(const std::string& key, const std::string& fallback) const;
    bool run_has(const std::string& key) const;
    std::vector<double> run_grid(const std::string& key) const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin);

}  // namespace dr
