#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace tpfl {

// Everything observable about one federation round.
struct RoundReport {
    int round = 0;  // 1-based
    double mean_accuracy = 0.0;
    std::vector<double> per_client_accuracy;
    std::map<int, std::vector<int>> clusters;  // class -> sorted client ids
    std::uint64_t upload_bytes = 0;
    std::uint64_t download_bytes = 0;

    // Instrumentation for the O(R(M+K)) accounting; not serialized.
    int client_iterations = 0;
    int cluster_iterations = 0;
};

struct ExperimentRun {
    int experiment = 0;
    std::vector<RoundReport> rounds;
};

struct ExperimentSummary {
    int experiment = 0;
    double final_mean_accuracy = 0.0;
    std::uint64_t cumulative_upload_bytes = 0;
    std::uint64_t cumulative_download_bytes = 0;
    std::vector<double> accuracy_trajectory;
};

// Per-round upload: every client ships one class weight vector plus a 4-byte
// class id and 4-byte client id.
std::uint64_t account_upload(int client_count, int clauses_per_class,
                             int bytes_per_weight);

// Per-round download: one broadcast per non-empty cluster, each carrying the
// averaged vector plus a 4-byte class id.
std::uint64_t account_download(int cluster_count, int clauses_per_class,
                               int bytes_per_weight);

ExperimentSummary summarize(const ExperimentRun& run);

// Writes rounds.jsonl, summary.json, accuracy_vs_round.csv and comm_costs.csv
// under out_dir. Rewriting the same reports produces byte-identical files.
// Returns the paths written.
std::vector<std::filesystem::path> emit_reports(
    std::span<const ExperimentRun> runs, const std::filesystem::path& out_dir);

}  // namespace tpfl
