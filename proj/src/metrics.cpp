#include "tpfl/metrics.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "tpfl/error.hpp"

namespace tpfl {
namespace {

nlohmann::ordered_json round_to_json(int experiment, const RoundReport& report) {
    nlohmann::ordered_json clusters = nlohmann::ordered_json::object();
    for (const auto& [class_index, members] : report.clusters)
        clusters[std::to_string(class_index)] = members;
    return {{"experiment", experiment},
            {"round", report.round},
            {"mean_accuracy", report.mean_accuracy},
            {"per_client_accuracy", report.per_client_accuracy},
            {"clusters", clusters},
            {"upload_bytes", report.upload_bytes},
            {"download_bytes", report.download_bytes}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string format_accuracy(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.10g", value);
    return buffer;
}

}  // namespace

std::uint64_t account_upload(int client_count, int clauses_per_class,
                             int bytes_per_weight) {
    const std::uint64_t payload =
        std::uint64_t(clauses_per_class) * bytes_per_weight + 8;
    return std::uint64_t(client_count) * payload;
}

std::uint64_t account_download(int cluster_count, int clauses_per_class,
                               int bytes_per_weight) {
    const std::uint64_t payload =
        std::uint64_t(clauses_per_class) * bytes_per_weight + 4;
    return std::uint64_t(cluster_count) * payload;
}

ExperimentSummary summarize(const ExperimentRun& run) {
    ExperimentSummary summary;
    summary.experiment = run.experiment;
    for (const auto& report : run.rounds) {
        summary.cumulative_upload_bytes += report.upload_bytes;
        summary.cumulative_download_bytes += report.download_bytes;
        summary.accuracy_trajectory.push_back(report.mean_accuracy);
    }
    if (!run.rounds.empty())
        summary.final_mean_accuracy = run.rounds.back().mean_accuracy;
    return summary;
}

std::vector<std::filesystem::path> emit_reports(
    std::span<const ExperimentRun> runs, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());

    std::string rounds_text;
    for (const auto& run : runs)
        for (const auto& report : run.rounds)
            rounds_text += round_to_json(run.experiment, report).dump() + "\n";

    nlohmann::ordered_json summary_doc;
    summary_doc["experiments"] = nlohmann::ordered_json::array();
    for (const auto& run : runs) {
        ExperimentSummary s = summarize(run);
        summary_doc["experiments"].push_back(
            {{"experiment", s.experiment},
             {"final_mean_accuracy", s.final_mean_accuracy},
             {"cumulative_upload_bytes", s.cumulative_upload_bytes},
             {"cumulative_download_bytes", s.cumulative_download_bytes},
             {"accuracy", s.accuracy_trajectory}});
    }

    std::string accuracy_csv = "experiment,round,mean_accuracy\n";
    std::string comm_csv = "experiment,round,upload_bytes,download_bytes\n";
    for (const auto& run : runs) {
        for (const auto& report : run.rounds) {
            accuracy_csv += std::to_string(run.experiment) + "," +
                            std::to_string(report.round) + "," +
                            format_accuracy(report.mean_accuracy) + "\n";
            comm_csv += std::to_string(run.experiment) + "," +
                        std::to_string(report.round) + "," +
                        std::to_string(report.upload_bytes) + "," +
                        std::to_string(report.download_bytes) + "\n";
        }
    }

    const std::vector<std::pair<std::filesystem::path, std::string>> files = {
        {out_dir / "rounds.jsonl", rounds_text},
        {out_dir / "summary.json", summary_doc.dump(2) + "\n"},
        {out_dir / "accuracy_vs_round.csv", accuracy_csv},
        {out_dir / "comm_costs.csv", comm_csv},
    };
    std::vector<std::filesystem::path> written;
    for (const auto& [path, text] : files) {
        write_text(path, text);
        written.push_back(path);
    }
    return written;
}

}  // namespace tpfl
