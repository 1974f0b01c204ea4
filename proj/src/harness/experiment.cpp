// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "harness/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "lm/pretrain.hpp"

namespace malm {
namespace {

void note(const ProgressFn& progress, const std::string& message) {
    if (progress) {
        progress(message);
    }
}

std::vector<std::string> vocab_corpus(const std::vector<text::Record>& records) {
    std::vector<std::string> lines;
    lines.reserve(records.size() * 3);
    for (const text::Record& r : records) {
        lines.push_back(r.question);
        lines.push_back(r.knowledge);
        lines.push_back(r.right_answer);
    }
    return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& items) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::io, "cannot write " + path.string());
    }
    for (const nlohmann::json& item : items) {
        out << item.dump() << '\n';
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::io, "cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

}  // namespace

nlohmann::json ArmSpec::to_json() const {
    return {{"label", label},           {"slug", slug},       {"layers", layers},
            {"ablation", ablation.to_json()}, {"lora", lora}, {"train_lora", train_lora}};
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json out_rows = nlohmann::json::array();
    for (const RunRow& row : rows) {
        nlohmann::json seeds = nlohmann::json::array();
        for (const SeedRun& s : row.seeds) {
            seeds.push_back({{"seed", s.seed},
                             {"checkpoint", s.checkpoint.string()},
                             {"generations", s.generations.string()},
                             {"train_log", s.train_log.string()},
                             {"optimizer_steps", s.optimizer_steps},
                             {"final_loss", s.final_loss},
                             {"report", s.report.to_json(false)}});
        }
        out_rows.push_back({{"arm", row.arm.to_json()}, {"seeds", seeds}, {"aggregate", row.aggregate.to_json(false)}});
    }
    return {{"format_version", format_version},
            {"kind", kind},
            {"name", name},
            {"config_hash", config_hash},
            {"config", config},
            {"foundation_digest", foundation_digest},
            {"rows", out_rows},
            {"extras", extras}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != manifest_format_version) {
            fail(ErrorKind::schema, "manifest: unsupported format version " + std::to_string(m.format_version));
        }
        m.kind = j.at("kind").get<std::string>();
        m.name = j.at("name").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.config = j.at("config");
        m.foundation_digest = j.at("foundation_digest").get<std::string>();
        m.extras = j.value("extras", nlohmann::json::object());
        for (const auto& jr : j.at("rows")) {
            RunRow row;
            const auto& a = jr.at("arm");
            row.arm.label = a.at("label").get<std::string>();
            row.arm.slug = a.at("slug").get<std::string>();
            row.arm.layers = a.at("layers").get<std::size_t>();
            row.arm.ablation = Ablation::from_json(a.at("ablation"));
            row.arm.lora = a.at("lora").get<bool>();
            row.arm.train_lora = a.at("train_lora").get<bool>();
            for (const auto& js : jr.at("seeds")) {
                SeedRun s;
                s.seed = js.at("seed").get<std::uint64_t>();
                s.checkpoint = js.at("checkpoint").get<std::string>();
                s.generations = js.at("generations").get<std::string>();
                s.train_log = js.at("train_log").get<std::string>();
                s.optimizer_steps = js.at("optimizer_steps").get<std::size_t>();
                s.final_loss = js.at("final_loss").get<double>();
                s.report = MetricReport::from_json(js.at("report"));
                row.seeds.push_back(std::move(s));
            }
            row.aggregate = MetricReport::from_json(jr.at("aggregate"));
            m.rows.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::schema, std::string("manifest: ") + e.what());
    }
    return m;
}

void RunManifest::save(const std::filesystem::path& path) const { write_json(path, to_json()); }

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::io, "cannot open manifest " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, "manifest " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

const RunRow& RunManifest::row(const std::string& slug) const {
    for (const RunRow& r : rows) {
        if (r.arm.slug == slug) {
            return r;
        }
    }
    fail(ErrorKind::invalid_argument, "manifest has no row '" + slug + "'");
}

std::string RunManifest::table() const {
    std::vector<std::pair<std::string, MetricReport>> entries;
    for (const RunRow& r : rows) {
        entries.emplace_back(r.arm.label, r.aggregate);
    }
    return format_report_table(entries);
}

std::vector<std::vector<TokenId>> pretraining_corpus(std::span<const text::Sample> train, std::size_t max_len) {
    std::vector<std::vector<TokenId>> seqs;
    seqs.reserve(train.size() * 2);
    for (const text::Sample& s : train) {
        seqs.push_back(lm_sequence(s.question, s.answer, max_len));
        if (!s.knowledge.empty()) {
            seqs.push_back(lm_sequence({}, s.knowledge, max_len));
        }
    }
    return seqs;
}

PreparedData prepare_data(const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    PreparedData data;
    const auto train_records = text::read_records(config.train_path);
    const auto test_records = text::read_records(config.test_path);
    if (!config.vocab_path.empty()) {
        data.vocab = text::Vocabulary::load(config.vocab_path);
    } else {
        data.vocab = text::Vocabulary::build(vocab_corpus(train_records), config.vocab_max_size);
    }
    data.train = text::encode_records(train_records, data.vocab);
    data.test = text::encode_records(test_records, data.vocab);

    const std::filesystem::path out_dir = resolve_output_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);
    if (!config.foundation_checkpoint.empty()) {
        data.foundation_path = config.foundation_checkpoint;
        data.foundation = Foundation::from_section(read_checkpoint(data.foundation_path).section("foundation"));
        if (data.foundation.config().vocab_size != data.vocab.size()) {
            fail(ErrorKind::config, "foundation vocabulary size " +
                                        std::to_string(data.foundation.config().vocab_size) +
                                        " does not match the vocabulary (" + std::to_string(data.vocab.size()) +
                                        ")");
        }
    } else {
        FoundationConfig fc = config.foundation;
        fc.vocab_size = data.vocab.size();
        const auto seqs = pretraining_corpus(data.train, fc.max_seq_len);
        note(progress, "pretraining foundation: " + std::to_string(config.pretrain.steps) + " steps on " +
                           std::to_string(seqs.size()) + " sequences");
        PretrainResult result = pretrain_foundation(seqs, fc, config.pretrain);
        note(progress, "held-out loss " + std::to_string(result.initial_heldout_loss) + " -> " +
                           std::to_string(result.final_heldout_loss));
        data.foundation = std::move(result.model);
        data.foundation_path = out_dir / "foundation.ckpt";
        data.foundation.save(data.foundation_path);
    }
    if (config.vocab_path.empty()) {
        data.vocab.save(out_dir / "vocab.txt");
    }
    data.foundation_digest = file_digest(data.foundation_path);
    return data;
}

ArmSpec baseline_arm(const ExperimentConfig&) {
    ArmSpec arm;
    arm.label = "Baseline (L=0, LoRA)";
    arm.slug = "baseline";
    arm.layers = 0;
    arm.lora = true;
    arm.train_lora = true;
    return arm;
}

ArmSpec adapter_arm(const ExperimentConfig& config) {
    ArmSpec arm;
    arm.label = "MALM";
    arm.slug = "malm";
    arm.layers = config.adapter.layers;
    arm.ablation = config.adapter.ablation;
    arm.lora = config.lora.joint_with_adapter;
    arm.train_lora = config.lora.joint_with_adapter;
    return arm;
}

std::vector<ArmSpec> ablation_arms(const ExperimentConfig& config) {
    std::vector<ArmSpec> arms{adapter_arm(config)};
    const std::pair<const char*, bool Ablation::*> variants[] = {
        {"no-context", &Ablation::no_context_edges},
        {"full-context", &Ablation::full_context_edges},
        {"no-input", &Ablation::no_input_edges},
        {"no-knowledge", &Ablation::no_knowledge_edges},
    };
    for (const auto& [slug, flag] : variants) {
        ArmSpec arm = adapter_arm(config);
        arm.ablation = Ablation{};
        arm.ablation.*flag = true;
        arm.label = arm.ablation.label();
        arm.slug = slug;
        arms.push_back(arm);
    }
    return arms;
}

std::vector<ArmSpec> layer_sweep_arms(const ExperimentConfig& config, std::span<const std::size_t> layers) {
    std::vector<ArmSpec> arms;
    for (std::size_t l : layers) {
        ArmSpec arm = l == 0 ? baseline_arm(config) : adapter_arm(config);
        arm.layers = l;
        arm.label = "L=" + std::to_string(l);
        arm.slug = "layers-" + std::to_string(l);
        arms.push_back(arm);
    }
    return arms;
}

TrainedArm train_arm(const ExperimentConfig& config, const PreparedData& data, const ArmSpec& arm,
                     std::uint64_t seed, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Rng root(seed);
    Rng lora_rng = root.fork();
    Rng adapter_rng = root.fork();

    TrainedArm out;
    MalmModel& model = out.model;
    model.foundation = data.foundation.clone();
    if (arm.lora) {
        model.lora = apply_lora(model.foundation, config.lora.targets, config.lora.rank, config.lora.scaling, lora_rng);
    }
    model.adapter_config = config.adapter;
    model.adapter_config.layers = arm.layers;
    model.adapter_config.ablation = arm.ablation;
    if (arm.layers > 0) {
        model.adapter = AdapterParams::init(model.foundation.config().width, model.adapter_config, adapter_rng);
    }

    TrainConfig tc = config.train;
    tc.seed = seed;
    tc.train_adapter = arm.layers > 0;
    tc.train_lora = arm.lora && arm.train_lora;
    tc.checkpoint_dir.clear();

    std::vector<nlohmann::json> log;
    if (tc.train_adapter || tc.train_lora) {
        const TrainSummary summary = train_adapter(model, data.train, tc, [&](const TrainRecord& r) {
            log.push_back(r.to_json());
        });
        out.optimizer_steps = summary.optimizer_steps;
        out.final_loss = summary.records.empty() ? 0.0 : summary.records.back().loss;
    }
    write_lines(dir / "train_log.jsonl", log);
    model.save(dir / "model.ckpt");
    return out;
}

std::vector<GeneratedText> generate_outputs(const MalmModel& model, const text::Vocabulary& vocab,
                                            std::span<const text::Sample> samples, const DecodingConfig& decoding,
                                            std::size_t knowledge_max_tokens, std::uint64_t seed) {
    std::vector<GeneratedText> outputs;
    outputs.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const text::Sample& s = samples[i];
        DecodingConfig dc = decoding;
        dc.seed = seed * 1000003 + i;
        const Generation g = generate(model, s.question, clipped_knowledge(s, knowledge_max_tokens), dc);
        outputs.push_back({s.id, vocab.decode(g.tokens)});
    }
    return outputs;
}

ArmSpec arm_by_slug(const ExperimentConfig& config, const std::string& slug) {
    if (slug == "baseline") {
        return baseline_arm(config);
    }
    for (const ArmSpec& arm : ablation_arms(config)) {
        if (arm.slug == slug) {
            return arm;
        }
    }
    const std::string prefix = "layers-";
    if (slug.rfind(prefix, 0) == 0 && slug.size() > prefix.size() &&
        slug.find_first_not_of("0123456789", prefix.size()) == std::string::npos) {
        const std::size_t layers[] = {std::stoul(slug.substr(prefix.size()))};
        return layer_sweep_arms(config, layers).front();
    }
    fail(ErrorKind::config, "unknown arm '" + slug +
                                "' (expected baseline, malm, no-context, full-context, no-input, no-knowledge or "
                                "layers-<L>)");
}

SeedRun run_arm(const ExperimentConfig& config, const PreparedData& data, const ArmSpec& arm, std::uint64_t seed,
                const std::filesystem::path& dir, const ProgressFn& progress) {
    const TrainedArm trained = train_arm(config, data, arm, seed, dir);
    SeedRun run;
    run.seed = seed;
    run.train_log = dir / "train_log.jsonl";
    run.checkpoint = dir / "model.ckpt";
    run.optimizer_steps = trained.optimizer_steps;
    run.final_loss = trained.final_loss;

    const auto outputs =
        generate_outputs(trained.model, data.vocab, data.test, config.decoding, config.train.knowledge_max_tokens, seed);
    std::vector<Reference> refs;
    refs.reserve(data.test.size());
    for (const text::Sample& s : data.test) {
        refs.push_back({s.id, s.answer_text});
    }
    run.generations = dir / "generations.jsonl";
    write_generations(run.generations, outputs);
    run.report = evaluate_outputs(outputs, refs);
    write_json(dir / "report.json", run.report.to_json(true));
    std::ostringstream msg;
    msg << arm.label << " seed " << seed << ": EM " << run.report.exact_match << ", ROUGE-1 " << run.report.rouge1;
    note(progress, msg.str());
    return run;
}

RunManifest run_rows(const std::string& kind, const ExperimentConfig& config, const PreparedData& data,
                     std::span<const ArmSpec> arms, const ProgressFn& progress) {
    const std::filesystem::path out_dir = resolve_output_dir(config.output_dir);
    RunManifest m;
    m.kind = kind;
    m.name = config.name;
    m.config = config.to_json();
    m.config_hash = config.hash();
    m.foundation_digest = data.foundation_digest;
    for (const ArmSpec& arm : arms) {
        RunRow row;
        row.arm = arm;
        std::vector<MetricReport> reports;
        for (std::uint64_t seed : config.seeds) {
            const auto dir = out_dir / arm.slug / ("seed-" + std::to_string(seed));
            row.seeds.push_back(run_arm(config, data, arm, seed, dir, progress));
            reports.push_back(row.seeds.back().report);
        }
        row.aggregate = mean_report(reports);
        m.rows.push_back(std::move(row));
    }
    m.save(out_dir / "manifest.json");
    return m;
}

RunManifest run_compare(const ExperimentConfig& config, const ProgressFn& progress) {
    const PreparedData data = prepare_data(config, progress);
    const ArmSpec arms[] = {baseline_arm(config), adapter_arm(config)};
    return run_rows("compare", config, data, arms, progress);
}

RunManifest run_ablation(const ExperimentConfig& config, const ProgressFn& progress) {
    const PreparedData data = prepare_data(config, progress);
    const auto arms = ablation_arms(config);
    return run_rows("ablation", config, data, arms, progress);
}

RunManifest run_layer_sweep(const ExperimentConfig& config, std::span<const std::size_t> layers,
                            const ProgressFn& progress) {
    if (layers.empty()) {
        fail(ErrorKind::config, "layer sweep needs at least one layer count");
    }
    const PreparedData data = prepare_data(config, progress);
    const auto arms = layer_sweep_arms(config, layers);
    return run_rows("layer_sweep", config, data, arms, progress);
}

std::size_t attach_retrieved_knowledge(std::vector<text::Sample>& samples, const InvertedIndex& index,
                                       std::size_t k, const text::Vocabulary& vocab) {
    std::size_t empty = 0;
    for (text::Sample& s : samples) {
        std::string joined;
        for (const Hit& hit : retrieve_topk(s.question_text, index, k)) {
            if (hit.score <= 0.0) {
                continue;
            }
            if (!joined.empty()) {
                joined += ' ';
            }
            joined += index.passage(hit.passage).text;
        }
        if (joined.empty()) {
            ++empty;
        }
        s.knowledge_text = std::move(joined);
        s.knowledge = vocab.encode(s.knowledge_text);
    }
    return empty;
}

RunManifest run_rag(const ExperimentConfig& config, const ProgressFn& progress) {
    PreparedData data = prepare_data(config, progress);
    nlohmann::json extras = {{"retrieval_mode", config.retrieval.mode == KnowledgeSource::bm25 ? "bm25" : "dataset"}};
    if (config.retrieval.mode == KnowledgeSource::bm25) {
        const InvertedIndex index = InvertedIndex::load(config.retrieval.index);
        const std::size_t empty_train = attach_retrieved_knowledge(data.train, index, config.retrieval.k, data.vocab);
        const std::size_t empty_test = attach_retrieved_knowledge(data.test, index, config.retrieval.k, data.vocab);
        note(progress, "retrieval left " + std::to_string(empty_train + empty_test) + " questions without knowledge");

        std::vector<QueryAnswer> queries;
        for (const text::Sample& s : data.test) {
            queries.push_back({s.question_text, s.answer_text});
        }
        nlohmann::json accuracy = nlohmann::json::object();
        for (const auto& [k, pct] : topk_accuracy(queries, index, config.retrieval.accuracy_ks)) {
            accuracy[std::to_string(k)] = pct;
        }
        extras["k"] = config.retrieval.k;
        extras["empty_retrievals"] = {{"train", empty_train}, {"test", empty_test}};
        extras["topk_accuracy"] = accuracy;
    }
    const ArmSpec arms[] = {baseline_arm(config), adapter_arm(config)};
    RunManifest m = run_rows("rag", config, data, arms, progress);
    m.extras = extras;
    m.save(resolve_output_dir(config.output_dir) / "manifest.json");
    return m;
}

}  // namespace malm
