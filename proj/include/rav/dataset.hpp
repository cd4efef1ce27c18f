#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rav/errors.hpp"

namespace rav {

// Ordered set of admissible veracity labels. Labels are canonical:
// lowercase, hyphen-joined, unique, non-empty.
class LabelSpace {
public:
    LabelSpace() = default;
    LabelSpace(std::string name, std::vector<std::string> labels);

    // Shipped spaces.
    static const LabelSpace& politifact5();  // true .. false, 5 classes
    static const LabelSpace& threeclass();   // true, half-true, false
    static const LabelSpace& binary();       // supported, refuted

    // Accepts a shipped name ("politifact-5"/"5class", "3class", "binary"/
    // "2class") or an inline definition "custom:<name>:a,b,c" / "custom:a,b,c".
    static LabelSpace from_spec(const std::string& spec);

    const std::string& name() const { return name_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }
    bool contains(std::string_view label) const;
    std::optional<std::size_t> index_of(std::string_view label) const;

    bool operator==(const LabelSpace&) const = default;

private:
    std::string name_;
    std::vector<std::string> labels_;
};

struct DateField {
    std::string raw;                  // as found in the source file
    std::optional<std::string> iso;   // YYYY-MM-DD when parseable

    bool operator==(const DateField&) const = default;
};

struct ClaimRecord {
    std::string id;
    std::string label;
    std::string claim;
    std::string evidence;
    std::optional<std::string> speaker;
    std::optional<std::string> factcheck_analysis_link;
    std::optional<DateField> factcheck_date;
    std::optional<std::string> fact_checker;
    std::optional<DateField> claim_date;
    std::optional<std::string> claim_source;
    // Unknown input fields, preserved verbatim for round-tripping.
    nlohmann::json extra = nlohmann::json::object();

    bool has_evidence() const { return !evidence.empty(); }

    bool operator==(const ClaimRecord&) const = default;
};

enum class SplitTag { train, test, validation, unsplit };

const char* to_string(SplitTag t);

// Optional loader remappings: `names` renames source keys to the canonical
// schema; `label_values` maps source label tokens (e.g. "SUPPORTS") onto
// canonical labels before space membership is checked.
struct FieldMap {
    std::map<std::string, std::string> names;
    std::map<std::string, std::string> label_values;
};

// Immutable after construction; safe to share across pipeline workers.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<ClaimRecord> records, LabelSpace space,
            SplitTag split_tag = SplitTag::unsplit);

    const std::vector<ClaimRecord>& records() const { return records_; }
    const LabelSpace& space() const { return space_; }
    SplitTag split_tag() const { return split_tag_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    const ClaimRecord* find(std::string_view id) const;
    std::map<std::string, long long> label_counts() const;

    bool operator==(const Dataset&) const = default;

private:
    std::vector<ClaimRecord> records_;
    LabelSpace space_;
    SplitTag split_tag_ = SplitTag::unsplit;
};

// Lowercase, spaces/underscores to hyphens, surrounding whitespace removed.
// Loader-side canonicalization only; no substring matching happens here.
std::string canonical_label_token(std::string_view raw);

Dataset load_jsonl(const std::string& path, const LabelSpace& space,
                   const FieldMap& field_map = {},
                   SplitTag split_tag = SplitTag::unsplit);
void write_jsonl(const Dataset& d, const std::string& path);

// Replaces each record label by its mapping image (identity when absent).
// Targets must belong to `out_space`.
Dataset merge_labels(const Dataset& d,
                     const std::map<std::string, std::string>& mapping,
                     const LabelSpace& out_space);

struct SplitSizes {
    int train = 0;
    int test = 0;
    int validation = 0;
};

struct Splits {
    Dataset train;
    Dataset test;
    Dataset validation;
};

// Deterministic for a fixed seed. Per-class counts in every split land
// within one record of the exact proportional target.
Splits stratified_split(const Dataset& d, SplitSizes sizes, std::uint64_t seed);
// Plain shuffled split, same determinism guarantee.
Splits random_split(const Dataset& d, SplitSizes sizes, std::uint64_t seed);

}  // namespace rav
