// Copyright (c) 2026, MALM contributors
// SPDX-License-Identifier: Apache-2.0

#include "text/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "common/error.hpp"

namespace malm::text {
namespace {

std::string required_string(const nlohmann::json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        fail(ErrorKind::schema, where + ": missing field '" + field + "'");
    }
    if (!it->is_string()) {
        fail(ErrorKind::schema, where + ": field '" + field + "' must be a string");
    }
    return it->get<std::string>();
}

}  // namespace

std::vector<Record> read_records(std::istream& in, const std::string& source) {
    std::vector<Record> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = source + ":" + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::parse, where + ": malformed JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) {
            fail(ErrorKind::parse, where + ": expected a JSON object");
        }
        Record r;
        r.line = line_no;
        r.question = required_string(obj, "question", where);
        r.knowledge = required_string(obj, "knowledge", where);
        r.right_answer = required_string(obj, "right_answer", where);
        if (auto it = obj.find("id"); it != obj.end()) {
            r.id = it->is_string() ? it->get<std::string>() : it->dump();
        } else {
            r.id = std::to_string(records.size());
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<Record> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::io, "cannot open dataset " + path.string());
    }
    return read_records(in, path.string());
}

void write_records(const std::filesystem::path& path, const std::vector<Record>& records) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorKind::io, "cannot write dataset " + path.string());
    }
    for (const Record& r : records) {
        nlohmann::json obj = {{"id", r.id}, {"question", r.question}, {"knowledge", r.knowledge}, {"right_answer", r.right_answer}};
        out << obj.dump() << '\n';
    }
}

Sample encode_record(const Record& record, const Vocabulary& vocab) {
    Sample s;
    s.id = record.id;
    s.line = record.line;
    s.question_text = record.question;
    s.knowledge_text = record.knowledge;
    s.answer_text = record.right_answer;
    s.question = vocab.encode(record.question);
    s.knowledge = vocab.encode(record.knowledge);
    s.answer = vocab.encode(record.right_answer);
    const std::string where = "line " + std::to_string(record.line);
    if (s.question.empty()) {
        fail(ErrorKind::schema, where + ": field 'question' has no tokens");
    }
    if (s.answer.empty()) {
        fail(ErrorKind::schema, where + ": field 'right_answer' has no tokens");
    }
    return s;
}

std::vector<Sample> encode_records(const std::vector<Record>& records, const Vocabulary& vocab) {
    std::vector<Sample> out;
    out.reserve(records.size());
    for (const Record& r : records) {
        out.push_back(encode_record(r, vocab));
    }
    return out;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path, const Vocabulary& vocab) {
    return encode_records(read_records(path), vocab);
}

}  // namespace malm::text
