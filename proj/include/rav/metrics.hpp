#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rav/dataset.hpp"
#include "rav/results.hpp"

namespace rav {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Rows are gold labels in space order; columns are predicted labels plus a
// final overflow column for failed / out-of-space predictions.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(LabelSpace space);

    void add(const std::string& gold, const std::string& predicted);
    long long at(std::size_t gold_idx, std::size_t pred_idx) const;  // pred_idx == size() is overflow
    long long total() const { return total_; }
    long long overflow_total() const;
    const LabelSpace& space() const { return space_; }

    std::string to_csv() const;

private:
    LabelSpace space_;
    std::vector<std::vector<long long>> counts_;
    long long total_ = 0;
};

struct MetricsReport {
    std::map<std::string, ClassMetrics> per_class;
    double macro_f1 = 0.0;  // mean F1 over the full label space
    double micro_f1 = 0.0;  // equals accuracy for single-label multiclass
    long long n = 0;
    double failure_rate = 0.0;
    ConfusionMatrix confusion;
};

// Requires exact id coverage: every result id must exist in gold, no result
// id may repeat, and every gold id must be predicted.
MetricsReport evaluate(const std::vector<ClaimResult>& results, const Dataset& gold);
MetricsReport report_from_confusion(const ConfusionMatrix& cm);

nlohmann::json report_to_json(const MetricsReport& r);
std::string report_to_table(const MetricsReport& r);

// N items x q categories grid of rater counts; every row sums to the
// constant number of raters per item.
class RatingMatrix {
public:
    RatingMatrix(std::size_t items, std::size_t categories);

    // One row of category labels per item, one column per rater.
    static RatingMatrix from_labels(const std::vector<std::vector<std::string>>& rows);

    void set(std::size_t item, std::size_t category, long long count);
    long long at(std::size_t item, std::size_t category) const;
    std::size_t items() const { return counts_.size(); }
    std::size_t categories() const { return counts_.empty() ? 0 : counts_[0].size(); }
    const std::vector<std::string>& category_names() const { return category_names_; }

    // Raters per item; raises ConfigError when rows disagree or n < 2.
    long long raters_per_item() const;

private:
    std::vector<std::vector<long long>> counts_;
    std::vector<std::string> category_names_;
};

// Fleiss' kappa. Exactly 1.0 under perfect agreement; a degenerate expected
// agreement of 1 (single category everywhere) raises DegenerateDistribution.
double fleiss_kappa(const RatingMatrix& m);

struct ClassCorpusStats {
    long long count = 0;
    double token_mean = 0.0;
    double sentence_mean = 0.0;
    std::optional<double> bpe_mean;
    std::optional<double> unfiltered_token_mean;
    std::optional<double> length_reduction_pct;  // 100*(unfil - fil)/unfil
};

struct CorpusStats {
    std::vector<std::pair<std::string, ClassCorpusStats>> per_label;  // space order
    ClassCorpusStats overall;
};

using TokenCounter = std::function<long long(const std::string&)>;

long long count_tokens(const std::string& text);     // whitespace-separated units
long long count_sentences(const std::string& text);  // ./!/? followed by space or end

// Evidence-length statistics per class. When `unfiltered` is given its id
// set must match and per-class plus overall length reductions are filled.
// `bpe_counter` is a plug-in; bpe_mean is omitted without one.
CorpusStats corpus_stats(const Dataset& filtered, const Dataset* unfiltered = nullptr,
                         TokenCounter bpe_counter = nullptr);
std::string corpus_stats_to_table(const CorpusStats& s);

struct CategoryProfile {
    double mean_questions = 0.0;
    std::map<int, long long> histogram;  // |history| -> trajectory count
    long long n = 0;
};

// Sub-question counts per claim category, over ok trajectories. Every claim
// id must have a category.
std::map<std::string, CategoryProfile> complexity_profile(
    const std::vector<ClaimResult>& results,
    const std::map<std::string, std::string>& category_of);

}  // namespace rav
