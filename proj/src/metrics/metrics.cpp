// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "common/error.hpp"
#include "text/normalize.hpp"

namespace malm {
namespace {

using Ngrams = std::map<std::vector<std::string>, std::size_t>;

Ngrams count_ngrams(const std::vector<std::string>& words, std::size_t n) {
    Ngrams out;
    if (words.size() < n) {
        return out;
    }
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
        ++out[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                       words.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return out;
}

std::size_t clipped_overlap(const Ngrams& hyp, const Ngrams& ref) {
    std::size_t total = 0;
    for (const auto& [gram, count] : hyp) {
        auto it = ref.find(gram);
        if (it != ref.end()) {
            total += std::min(count, it->second);
        }
    }
    return total;
}

std::size_t total_count(const Ngrams& g) {
    std::size_t t = 0;
    for (const auto& [gram, count] : g) {
        t += count;
    }
    return t;
}

double f1_percent(std::size_t overlap, std::size_t hyp_total, std::size_t ref_total) {
    if (overlap == 0 || hyp_total == 0 || ref_total == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(overlap) / static_cast<double>(hyp_total);
    const double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
    return 100.0 * 2.0 * p * r / (p + r);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

double rouge_n(std::string_view hypothesis, std::string_view reference, std::size_t n) {
    if (n != 1 && n != 2) {
        fail(ErrorKind::invalid_argument, "rouge_n: n must be 1 or 2");
    }
    const Ngrams h = count_ngrams(text::metric_tokens(hypothesis), n);
    const Ngrams r = count_ngrams(text::metric_tokens(reference), n);
    return f1_percent(clipped_overlap(h, r), total_count(h), total_count(r));
}

double rouge_l(std::string_view hypothesis, std::string_view reference) {
    const auto h = text::metric_tokens(hypothesis);
    const auto r = text::metric_tokens(reference);
    return f1_percent(lcs_length(h, r), h.size(), r.size());
}

int exact_match(std::string_view hypothesis, std::string_view reference) {
    return text::normalize_answer(hypothesis) == text::normalize_answer(reference) ? 1 : 0;
}

BleuResult bleu(std::span<const std::string> hypotheses, std::span<const std::string> references, std::size_t max_n) {
    if (hypotheses.empty()) {
        fail(ErrorKind::invalid_argument, "bleu: empty corpus");
    }
    if (hypotheses.size() != references.size()) {
        fail(ErrorKind::alignment, "bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                                       std::to_string(references.size()) + " references");
    }
    if (max_n == 0) {
        fail(ErrorKind::invalid_argument, "bleu: max_n must be >= 1");
    }
    std::vector<std::size_t> matches(max_n, 0);
    std::vector<std::size_t> totals(max_n, 0);
    BleuResult out;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto h = text::metric_tokens(hypotheses[i]);
        const auto r = text::metric_tokens(references[i]);
        out.hypothesis_length += h.size();
        out.reference_length += r.size();
        for (std::size_t n = 1; n <= max_n; ++n) {
            const Ngrams hg = count_ngrams(h, n);
            matches[n - 1] += clipped_overlap(hg, count_ngrams(r, n));
            totals[n - 1] += total_count(hg);
        }
    }
    const double c = static_cast<double>(out.hypothesis_length);
    const double r = static_cast<double>(out.reference_length);
    if (out.hypothesis_length == 0) {
        return out;
    }
    out.brevity_penalty = c < r ? std::exp(1.0 - r / c) : 1.0;
    double log_sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t n = 0; n < max_n; ++n) {
        if (totals[n] == 0) {
            continue;
        }
        const double num = matches[n] == 0 ? bleu_smoothing_epsilon : static_cast<double>(matches[n]);
        const double p = num / static_cast<double>(totals[n]);
        out.precisions.push_back(p);
        log_sum += std::log(p);
        ++orders;
    }
    out.score = 100.0 * out.brevity_penalty * std::exp(log_sum / static_cast<double>(orders));
    return out;
}

nlohmann::json MetricReport::to_json(bool with_samples) const {
    nlohmann::json j = {{"rouge1", rouge1},           {"rouge2", rouge2}, {"rougeL", rougeL},
                        {"exact_match", exact_match}, {"bleu", bleu},     {"brevity_penalty", brevity_penalty},
                        {"empty_references", empty_references}};
    if (with_samples) {
        nlohmann::json arr = nlohmann::json::array();
        for (const SampleScore& s : samples) {
            arr.push_back({{"id", s.id},
                           {"rouge1", s.rouge1},
                           {"rouge2", s.rouge2},
                           {"rougeL", s.rougeL},
                           {"exact_match", s.exact_match}});
        }
        j["samples"] = std::move(arr);
    }
    return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport m;
    m.rouge1 = j.at("rouge1").get<double>();
    m.rouge2 = j.at("rouge2").get<double>();
    m.rougeL = j.at("rougeL").get<double>();
    m.exact_match = j.at("exact_match").get<double>();
    m.bleu = j.at("bleu").get<double>();
    m.brevity_penalty = j.at("brevity_penalty").get<double>();
    m.empty_references = j.value("empty_references", std::size_t{0});
    if (j.contains("samples")) {
        for (const auto& s : j["samples"]) {
            m.samples.push_back({s.at("id").get<std::string>(), s.at("rouge1").get<double>(),
                                 s.at("rouge2").get<double>(), s.at("rougeL").get<double>(),
                                 s.at("exact_match").get<int>()});
        }
    }
    return m;
}

std::vector<GeneratedText> align_generations(std::span<const GeneratedText> outputs,
                                             std::span<const Reference> references) {
    std::map<std::string, const GeneratedText*> by_id;
    std::vector<std::string> duplicates;
    for (const GeneratedText& g : outputs) {
        if (!by_id.emplace(g.id, &g).second) {
            duplicates.push_back(g.id);
        }
    }
    std::vector<std::string> missing;
    std::set<std::string> wanted;
    std::vector<GeneratedText> aligned;
    for (const Reference& r : references) {
        wanted.insert(r.id);
        auto it = by_id.find(r.id);
        if (it == by_id.end()) {
            missing.push_back(r.id);
        } else {
            aligned.push_back(*it->second);
        }
    }
    std::vector<std::string> unknown;
    for (const auto& [id, g] : by_id) {
        if (wanted.count(id) == 0) {
            unknown.push_back(id);
        }
    }
    if (!missing.empty() || !unknown.empty() || !duplicates.empty()) {
        auto list = [](const std::vector<std::string>& ids) {
            std::string s;
            for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
                s += (i ? ", " : "") + ids[i];
            }
            if (ids.size() > 20) {
                s += ", ...";
            }
            return s;
        };
        std::string msg = "generations do not align with the dataset (" + std::to_string(outputs.size()) +
                          " outputs, " + std::to_string(references.size()) + " references)";
        if (!missing.empty()) {
            msg += "; missing ids: " + list(missing);
        }
        if (!unknown.empty()) {
            msg += "; unknown ids: " + list(unknown);
        }
        if (!duplicates.empty()) {
            msg += "; duplicate ids: " + list(duplicates);
        }
        fail(ErrorKind::alignment, msg);
    }
    return aligned;
}

MetricReport evaluate_outputs(std::span<const GeneratedText> outputs, std::span<const Reference> references) {
    if (references.empty()) {
        fail(ErrorKind::invalid_argument, "evaluate: no references");
    }
    const std::vector<GeneratedText> aligned = align_generations(outputs, references);
    MetricReport report;
    std::vector<std::string> hyps;
    std::vector<std::string> refs;
    for (std::size_t i = 0; i < references.size(); ++i) {
        const std::string& h = aligned[i].output;
        const std::string& r = references[i].answer;
        if (text::metric_tokens(r).empty()) {
            ++report.empty_references;
        }
        SampleScore s{references[i].id, rouge_n(h, r, 1), rouge_n(h, r, 2), rouge_l(h, r), exact_match(h, r)};
        report.rouge1 += s.rouge1;
        report.rouge2 += s.rouge2;
        report.rougeL += s.rougeL;
        report.exact_match += s.exact_match;
        report.samples.push_back(std::move(s));
        hyps.push_back(h);
        refs.push_back(r);
    }
    const double n = static_cast<double>(references.size());
    report.rouge1 /= n;
    report.rouge2 /= n;
    report.rougeL /= n;
    report.exact_match = 100.0 * report.exact_match / n;
    const BleuResult b = bleu(hyps, refs);
    report.bleu = b.score;
    report.brevity_penalty = b.brevity_penalty;
    return report;
}

std::vector<GeneratedText> read_generations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::io, "cannot open generations " + path.string());
    }
    std::vector<GeneratedText> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::parse, where + ": malformed JSON (" + e.what() + ")");
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("output") || !obj["output"].is_string()) {
            fail(ErrorKind::schema, where + ": expected {\"id\", \"output\"}");
        }
        const auto& id = obj["id"];
        out.push_back({id.is_string() ? id.get<std::string>() : id.dump(), obj["output"].get<std::string>()});
    }
    return out;
}

void write_generations(const std::filesystem::path& path, std::span<const GeneratedText> outputs) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::io, "cannot write generations " + path.string());
    }
    for (const GeneratedText& g : outputs) {
        out << nlohmann::json{{"id", g.id}, {"output", g.output}}.dump() << '\n';
    }
}

MetricReport evaluate_run(const std::filesystem::path& generations, std::span<const Reference> references) {
    const std::vector<GeneratedText> outputs = read_generations(generations);
    return evaluate_outputs(outputs, references);
}

std::string format_report_table(std::span<const std::pair<std::string, MetricReport>> rows) {
    std::size_t label_width = 6;
    for (const auto& [label, r] : rows) {
        label_width = std::max(label_width, label.size());
    }
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-*s  %8s  %8s  %8s  %11s  %8s  %6s\n", static_cast<int>(label_width), "System",
                  "ROUGE-1", "ROUGE-2", "ROUGE-L", "Exact Match", "BLEU", "BP");
    out += buf;
    out += std::string(label_width + 2 + 8 + 2 + 8 + 2 + 8 + 2 + 11 + 2 + 8 + 2 + 6, '-') + "\n";
    for (const auto& [label, r] : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %8.2f  %8.2f  %11.2f  %8.2f  %6.3f\n",
                      static_cast<int>(label_width), label.c_str(), r.rouge1, r.rouge2, r.rougeL, r.exact_match,
                      r.bleu, r.brevity_penalty);
        out += buf;
    }
    return out;
}

MetricReport mean_report(std::span<const MetricReport> reports) {
    if (reports.empty()) {
        fail(ErrorKind::invalid_argument, "mean_report: no reports");
    }
    MetricReport m;
    for (const MetricReport& r : reports) {
        m.rouge1 += r.rouge1;
        m.rouge2 += r.rouge2;
        m.rougeL += r.rougeL;
        m.exact_match += r.exact_match;
        m.bleu += r.bleu;
        m.brevity_penalty += r.brevity_penalty;
        m.empty_references += r.empty_references;
    }
    const double n = static_cast<double>(reports.size());
    m.rouge1 /= n;
    m.rouge2 /= n;
    m.rougeL /= n;
    m.exact_match /= n;
    m.bleu /= n;
    m.brevity_penalty /= n;
    m.empty_references /= reports.size();
    return m;
}

}  // namespace malm
