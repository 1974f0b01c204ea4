// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace malm {

/// ROUGE-N F1 in percent over metric tokens. n must be 1 or 2.
double rouge_n(std::string_view hypothesis, std::string_view reference, std::size_t n);
/// LCS-based ROUGE-L F1 in percent.
double rouge_l(std::string_view hypothesis, std::string_view reference);
/// 1 when the normalised answers are equal, else 0.
int exact_match(std::string_view hypothesis, std::string_view reference);

struct BleuResult {
    double score = 0.0;  // percent
    double brevity_penalty = 0.0;
    std::size_t hypothesis_length = 0;
    std::size_t reference_length = 0;
    std::vector<double> precisions;  // per order, after smoothing
};

inline constexpr double bleu_smoothing_epsilon = 0.1;

/// Corpus BLEU. Orders with no hypothesis n-grams are left out of the
/// geometric mean; a zero match count becomes epsilon / total.
BleuResult bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
                std::size_t max_n = 4);

struct SampleScore {
    std::string id;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    int exact_match = 0;
};

struct MetricReport {
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double exact_match = 0.0;
    double bleu = 0.0;
    double brevity_penalty = 0.0;
    std::size_t empty_references = 0;
    std::vector<SampleScore> samples;

    nlohmann::json to_json(bool with_samples = true) const;
    static MetricReport from_json(const nlohmann::json& j);
};

struct GeneratedText {
    std::string id;
    std::string output;
};

struct Reference {
    std::string id;
    std::string answer;
};

MetricReport evaluate_outputs(std::span<const GeneratedText> outputs, std::span<const Reference> references);

/// Aligns by id; any missing, unknown or duplicate id is an alignment error.
std::vector<GeneratedText> align_generations(std::span<const GeneratedText> outputs,
                                             std::span<const Reference> references);

std::vector<GeneratedText> read_generations(const std::filesystem::path& path);
void write_generations(const std::filesystem::path& path, std::span<const GeneratedText> outputs);

MetricReport evaluate_run(const std::filesystem::path& generations, std::span<const Reference> references);

/// Fixed-width table, one row per labelled report.
std::string format_report_table(std::span<const std::pair<std::string, MetricReport>> rows);

/// Field-wise mean over seeds (per-sample lists are dropped).
MetricReport mean_report(std::span<const MetricReport> reports);

}  // namespace malm
