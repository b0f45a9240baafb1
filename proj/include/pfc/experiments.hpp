// SPDX-License-Identifier: Apache-2.0
#pragma once

// Config-driven runners, one per measurement, each producing CSV tables and
// a report that carries the full resolved parameter set.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfc/sequencer.hpp"

namespace pfc {

enum class Runner { splitting, chevron, power_sweep, store_retrieve, phase_sweep, custom_sequence };

std::string_view runner_name(Runner r) noexcept;
Runner runner_from_name(std::string_view name);

struct ConfigEntry {
    std::string key;
    std::string raw;
    std::size_t line = 0;  ///< 0 when set programmatically
};

/// Flat `key = value` configuration. Only syntax and globally unknown keys
/// are rejected here; per-runner checks happen when a runner resolves it.
class ExperimentConfig {
public:
    ExperimentConfig() = default;

    static ExperimentConfig parse(std::string_view text,
                                  std::filesystem::path base_dir = ".");
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Adds or replaces an entry.
    void set(const std::string& key, const std::string& raw);

    const std::vector<ConfigEntry>& entries() const noexcept { return entries_; }
    std::optional<Runner> runner() const;
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

private:
    std::vector<ConfigEntry> entries_;
    std::filesystem::path base_dir_ = ".";
};

struct RunOptions {
    std::size_t jobs = 1;
    bool lab_frame = false;
};

struct ExperimentResult {
    Runner runner = Runner::splitting;
    /// Defaults merged with overrides, in schema order.
    std::vector<std::pair<std::string, std::string>> resolved;
    std::map<std::string, double> metrics;
    /// (file name, contents), written in order.
    std::vector<std::pair<std::string, std::string>> files;

    double metric(const std::string& name) const;
};

/// Keys accepted by a runner, with their default text ("none" when unset).
std::vector<std::pair<std::string, std::string>> runner_defaults(Runner r);

/// Largest relative half-step disagreement tolerated by every runner.
inline constexpr double convergence_threshold = 1e-6;

ExperimentResult run_experiment(Runner runner, const ExperimentConfig& config,
                                const RunOptions& options = {});

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

} // namespace pfc
