#include "rav/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <unordered_set>

#include "rav/util.hpp"

namespace rav {

using nlohmann::json;

namespace {

bool canonical_label_ok(const std::string& label) {
    if (label.empty()) return false;
    for (char c : label) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
        if (!ok) return false;
    }
    return label.front() != '-' && label.back() != '-';
}

}  // namespace

LabelSpace::LabelSpace(std::string name, std::vector<std::string> labels)
    : name_(std::move(name)), labels_(std::move(labels)) {
    if (labels_.empty()) raise(Errc::ConfigError, "label space '" + name_ + "' has no labels");
    std::set<std::string> seen;
    for (const auto& l : labels_) {
        if (!canonical_label_ok(l)) {
            raise(Errc::ConfigError,
                  "label space '" + name_ + "': label '" + l +
                      "' is not canonical (lowercase, hyphen-joined)");
        }
        if (!seen.insert(l).second) {
            raise(Errc::ConfigError, "label space '" + name_ + "': duplicate label '" + l + "'");
        }
    }
}

const LabelSpace& LabelSpace::politifact5() {
    static const LabelSpace s("politifact-5",
                              {"true", "mostly-true", "half-true", "mostly-false", "false"});
    return s;
}

const LabelSpace& LabelSpace::threeclass() {
    static const LabelSpace s("3class", {"true", "half-true", "false"});
    return s;
}

const LabelSpace& LabelSpace::binary() {
    static const LabelSpace s("binary", {"supported", "refuted"});
    return s;
}

LabelSpace LabelSpace::from_spec(const std::string& spec) {
    std::string s = util::trim(spec);
    if (s == "politifact-5" || s == "5class") return politifact5();
    if (s == "3class" || s == "rawfc-3") return threeclass();
    if (s == "binary" || s == "2class") return binary();
    if (s.rfind("custom:", 0) == 0) {
        std::string rest = s.substr(7);
        std::string name = "custom";
        auto colon = rest.find(':');
        if (colon != std::string::npos) {
            name = util::trim(rest.substr(0, colon));
            rest = rest.substr(colon + 1);
        }
        auto labels = util::split_any(rest, ", ");
        return LabelSpace(name, labels);
    }
    raise(Errc::ConfigError, "unknown label space '" + s +
                                 "' (use politifact-5, 3class, binary, or custom:a,b,c)");
}

bool LabelSpace::contains(std::string_view label) const {
    return index_of(label).has_value();
}

std::optional<std::size_t> LabelSpace::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) return i;
    }
    return std::nullopt;
}

const char* to_string(SplitTag t) {
    switch (t) {
        case SplitTag::train: return "train";
        case SplitTag::test: return "test";
        case SplitTag::validation: return "validation";
        case SplitTag::unsplit: return "unsplit";
    }
    return "unsplit";
}

Dataset::Dataset(std::vector<ClaimRecord> records, LabelSpace space, SplitTag split_tag)
    : records_(std::move(records)), space_(std::move(space)), split_tag_(split_tag) {
    std::unordered_set<std::string> ids;
    ids.reserve(records_.size());
    for (const auto& r : records_) {
        if (r.claim.empty()) raise(Errc::MissingField, "record '" + r.id + "' has an empty claim");
        if (!space_.contains(r.label)) {
            raise(Errc::UnknownLabel,
                  "record '" + r.id + "' label '" + r.label + "' not in space " + space_.name());
        }
        if (!ids.insert(r.id).second) raise(Errc::DuplicateId, "duplicate record id '" + r.id + "'");
    }
}

const ClaimRecord* Dataset::find(std::string_view id) const {
    for (const auto& r : records_) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

std::map<std::string, long long> Dataset::label_counts() const {
    std::map<std::string, long long> counts;
    for (const auto& r : records_) counts[r.label]++;
    return counts;
}

std::string canonical_label_token(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : util::lower(util::trim(raw))) {
        if (c == ' ' || c == '_') c = '-';
        out.push_back(c);
    }
    return out;
}

namespace {

const std::set<std::string> kKnownKeys = {
    "id",        "label",          "claim",       "evidence",   "speaker",
    "factcheck_analysis_link",     "factcheck_date", "fact_checker",
    "claim_date", "claim_source"};

std::string scalar_to_string(const json& v, const char* key, std::size_t line_no) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    raise(Errc::MalformedLine, std::string("field '") + key + "' is not a string (line " +
                                   std::to_string(line_no) + ")");
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        raise(Errc::MissingField,
              std::string("missing field '") + key + "' (line " + std::to_string(line_no) + ")");
    }
    return scalar_to_string(*it, key, line_no);
}

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return scalar_to_string(*it, key, line_no);
}

std::optional<DateField> optional_date(const json& obj, const char* key, std::size_t line_no) {
    auto raw = optional_string(obj, key, line_no);
    if (!raw) return std::nullopt;
    // Unparseable dates stay raw; a date is metadata and must never reject
    // a record.
    return DateField{*raw, util::parse_date_iso(*raw)};
}

}  // namespace

Dataset load_jsonl(const std::string& path, const LabelSpace& space, const FieldMap& field_map,
                   SplitTag split_tag) {
    auto lines = util::read_lines(path);
    std::vector<ClaimRecord> records;
    records.reserve(lines.size());
    std::unordered_set<std::string> ids;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        std::string line = util::trim(lines[i]);
        if (line.empty()) continue;

        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            raise(Errc::MalformedLine, "not a JSON object (line " + std::to_string(line_no) + ")");
        }

        for (const auto& [src, dst] : field_map.names) {
            auto it = obj.find(src);
            if (it != obj.end() && !obj.contains(dst)) {
                obj[dst] = std::move(*it);
                obj.erase(src);
            }
        }

        ClaimRecord r;
        r.id = require_string(obj, "id", line_no);
        r.claim = require_string(obj, "claim", line_no);
        if (r.claim.empty()) {
            raise(Errc::MissingField, "field 'claim' is empty (line " + std::to_string(line_no) + ")");
        }
        r.evidence = require_string(obj, "evidence", line_no);

        std::string raw_label = require_string(obj, "label", line_no);
        std::string label = raw_label;
        if (auto it = field_map.label_values.find(label); it != field_map.label_values.end()) {
            label = it->second;
        }
        label = canonical_label_token(label);
        if (auto it = field_map.label_values.find(label); it != field_map.label_values.end()) {
            label = canonical_label_token(it->second);
        }
        if (!space.contains(label)) {
            raise(Errc::UnknownLabel, "label '" + raw_label + "' not in space " + space.name() +
                                          " (line " + std::to_string(line_no) + ")");
        }
        r.label = label;

        r.speaker = optional_string(obj, "speaker", line_no);
        r.factcheck_analysis_link = optional_string(obj, "factcheck_analysis_link", line_no);
        r.factcheck_date = optional_date(obj, "factcheck_date", line_no);
        r.fact_checker = optional_string(obj, "fact_checker", line_no);
        r.claim_date = optional_date(obj, "claim_date", line_no);
        r.claim_source = optional_string(obj, "claim_source", line_no);

        for (auto& [key, value] : obj.items()) {
            if (!kKnownKeys.count(key)) r.extra[key] = value;
        }

        if (!ids.insert(r.id).second) {
            raise(Errc::DuplicateId,
                  "duplicate id '" + r.id + "' (line " + std::to_string(line_no) + ")");
        }
        records.push_back(std::move(r));
    }

    return Dataset(std::move(records), space, split_tag);
}

void write_jsonl(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::IoError, "cannot open for writing: " + path);
    for (const auto& r : d.records()) {
        json obj = json::object();
        obj["id"] = r.id;
        obj["label"] = r.label;
        obj["claim"] = r.claim;
        obj["evidence"] = r.evidence;
        if (r.speaker) obj["speaker"] = *r.speaker;
        if (r.factcheck_analysis_link) obj["factcheck_analysis_link"] = *r.factcheck_analysis_link;
        if (r.factcheck_date) obj["factcheck_date"] = r.factcheck_date->raw;
        if (r.fact_checker) obj["fact_checker"] = *r.fact_checker;
        if (r.claim_date) obj["claim_date"] = r.claim_date->raw;
        if (r.claim_source) obj["claim_source"] = *r.claim_source;
        for (auto& [key, value] : r.extra.items()) obj[key] = value;
        out << obj.dump() << '\n';
    }
    if (!out) raise(Errc::IoError, "write failed: " + path);
}

Dataset merge_labels(const Dataset& d, const std::map<std::string, std::string>& mapping,
                     const LabelSpace& out_space) {
    for (const auto& [src, dst] : mapping) {
        if (!d.space().contains(src)) {
            raise(Errc::UnknownLabel,
                  "mapping source '" + src + "' not in space " + d.space().name());
        }
        if (!out_space.contains(dst)) {
            raise(Errc::TargetNotInSpace,
                  "mapping target '" + dst + "' not in space " + out_space.name());
        }
    }
    std::vector<ClaimRecord> records = d.records();
    for (auto& r : records) {
        auto it = mapping.find(r.label);
        if (it != mapping.end()) r.label = it->second;
        if (!out_space.contains(r.label)) {
            raise(Errc::UnknownLabel, "record '" + r.id + "' label '" + r.label +
                                          "' not in output space " + out_space.name());
        }
    }
    return Dataset(std::move(records), out_space, d.split_tag());
}

namespace {

Splits make_splits(const Dataset& d, std::vector<std::vector<const ClaimRecord*>> buckets) {
    auto build = [&](std::vector<const ClaimRecord*>& ptrs, SplitTag tag) {
        std::vector<ClaimRecord> recs;
        recs.reserve(ptrs.size());
        for (const auto* p : ptrs) recs.push_back(*p);
        return Dataset(std::move(recs), d.space(), tag);
    };
    return Splits{build(buckets[0], SplitTag::train), build(buckets[1], SplitTag::test),
                  build(buckets[2], SplitTag::validation)};
}

void check_sizes(const Dataset& d, SplitSizes sizes) {
    if (sizes.train < 0 || sizes.test < 0 || sizes.validation < 0) {
        raise(Errc::ConfigError, "split sizes must be non-negative");
    }
    long long want = static_cast<long long>(sizes.train) + sizes.test + sizes.validation;
    if (want > static_cast<long long>(d.size())) {
        raise(Errc::SizesExceedDataset, "requested " + std::to_string(want) + " records, dataset has " +
                                            std::to_string(d.size()));
    }
}

}  // namespace

Splits stratified_split(const Dataset& d, SplitSizes sizes, std::uint64_t seed) {
    check_sizes(d, sizes);
    const auto n_total = static_cast<double>(d.size());
    const std::array<int, 3> want = {sizes.train, sizes.test, sizes.validation};

    // Group record indices by label, in space order for determinism.
    std::vector<std::vector<const ClaimRecord*>> by_class(d.space().size());
    for (const auto& r : d.records()) {
        by_class[*d.space().index_of(r.label)].push_back(&r);
    }

    std::mt19937_64 rng(seed);
    for (auto& group : by_class) std::shuffle(group.begin(), group.end(), rng);

    // Per-split, per-class quotas: floor of the proportional target, then
    // the deficit goes to the largest fractional parts. Capacity-aware so a
    // class is never oversubscribed across splits; every allocation stays
    // within one record of the exact target.
    const std::size_t n_classes = by_class.size();
    std::vector<std::size_t> used(n_classes, 0);
    std::vector<std::vector<std::size_t>> quota(3, std::vector<std::size_t>(n_classes, 0));

    for (int s = 0; s < 3; ++s) {
        std::vector<double> frac(n_classes, 0.0);
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            double ideal = n_total == 0.0
                               ? 0.0
                               : static_cast<double>(want[s]) * static_cast<double>(by_class[c].size()) / n_total;
            auto fl = static_cast<std::size_t>(ideal);
            fl = std::min(fl, by_class[c].size() - used[c]);
            quota[s][c] = fl;
            frac[c] = ideal - static_cast<double>(fl);
            assigned += fl;
        }
        std::vector<std::size_t> order(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) order[c] = c;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
        std::size_t deficit = static_cast<std::size_t>(want[s]) - assigned;
        std::size_t oi = 0;
        while (deficit > 0) {
            std::size_t c = order[oi % n_classes];
            if (used[c] + quota[s][c] < by_class[c].size()) {
                quota[s][c]++;
                --deficit;
            }
            ++oi;
        }
        for (std::size_t c = 0; c < n_classes; ++c) used[c] += quota[s][c];
    }

    // Consume each shuffled class list: train first, then test, validation.
    std::vector<std::vector<const ClaimRecord*>> buckets(3);
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::size_t i = 0; i < quota[s][c]; ++i) buckets[s].push_back(by_class[c][pos++]);
        }
    }
    return make_splits(d, std::move(buckets));
}

Splits random_split(const Dataset& d, SplitSizes sizes, std::uint64_t seed) {
    check_sizes(d, sizes);
    std::vector<const ClaimRecord*> all;
    all.reserve(d.size());
    for (const auto& r : d.records()) all.push_back(&r);
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);

    std::vector<std::vector<const ClaimRecord*>> buckets(3);
    std::size_t pos = 0;
    const std::array<int, 3> want = {sizes.train, sizes.test, sizes.validation};
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < want[s]; ++i) buckets[s].push_back(all[pos++]);
    }
    return make_splits(d, std::move(buckets));
}

}  // namespace rav
