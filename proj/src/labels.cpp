#include "xplan/labels.hpp"

#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xplan::labels {

double explicability(const LabeledPlan& lp) {
    if (lp.labels.size() < 2) throw std::invalid_argument("explicability needs at least one real action");
    const std::size_t n = lp.labels.size() - 1;
    std::size_t labeled = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (!lp.labels[i].current.empty()) ++labeled;
    return static_cast<double>(labeled) / static_cast<double>(n);
}

double predictability(const LabeledPlan& lp) {
    if (lp.labels.empty()) throw std::invalid_argument("labeled plan has no positions");
    for (const auto& l : lp.labels)
        if (l.current.size() > 1 || l.next.size() > 1)
            throw std::invalid_argument("predictability assumes singleton or empty labels");

    const std::size_t n = lp.labels.size() - 1;
    std::size_t predicted = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        if (lp.labels[i].current.size() != 1) continue;
        // First later action pursuing a different task; the last action if none does.
        std::size_t j = n;
        for (std::size_t k = i + 1; k <= n; ++k)
            if (lp.labels[k].current != lp.labels[i].current) {
                j = k;
                break;
            }
        bool matches_next_task = lp.labels[i].next == lp.labels[j].current;
        bool nothing_anticipated = true;
        for (std::size_t k = i; k <= n; ++k)
            if (!lp.labels[k].next.empty()) {
                nothing_anticipated = false;
                break;
            }
        if (matches_next_task || nothing_anticipated) ++predicted;
    }
    return static_cast<double>(predicted) / static_cast<double>(n + 1);
}

MeasureReport measures(const LabeledPlan& lp) { return {explicability(lp), predictability(lp)}; }

// ---------------------------------------------------------------- JSONL

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json label_to_json(const ActionLabel& l) {
    ordered_json j;
    j["cur"] = std::vector<std::string>(l.current.begin(), l.current.end());
    j["next"] = std::vector<std::string>(l.next.begin(), l.next.end());
    return j;
}

ActionLabel label_from_json(const ordered_json& j) {
    ActionLabel l;
    for (const auto& s : j.at("cur")) l.current.insert(s.get<std::string>());
    for (const auto& s : j.at("next")) l.next.insert(s.get<std::string>());
    return l;
}

}  // namespace

std::string to_jsonl(const PlanRecord& record) {
    ordered_json j;
    j["problem_id"] = record.problem_id;
    j["plan"] = record.plan;
    ordered_json labels = ordered_json::array();
    for (const auto& l : record.labels) labels.push_back(label_to_json(l));
    j["labels"] = std::move(labels);
    j["features"] = record.features;
    j["split"] = record.split;
    return j.dump();
}

PlanRecord from_jsonl(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed dataset line: ") + e.what());
    }
    PlanRecord record;
    try {
        record.problem_id = j.at("problem_id").get<std::string>();
        record.plan = j.at("plan").get<std::vector<std::string>>();
        for (const auto& l : j.at("labels")) record.labels.push_back(label_from_json(l));
        record.features = j.at("features").get<std::vector<std::vector<std::string>>>();
        record.split = j.at("split").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed dataset record: ") + e.what());
    }
    if (record.labels.size() != record.plan.size() + 1)
        throw std::runtime_error("dataset record: label count must be plan length + 1");
    return record;
}

std::vector<PlanRecord> read_jsonl(const std::string& text) {
    std::vector<PlanRecord> records;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        records.push_back(from_jsonl(line));
    }
    return records;
}

std::string write_jsonl(const std::vector<PlanRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_jsonl(r);
        out.push_back('\n');
    }
    return out;
}

}  // namespace xplan::labels
