#include "rav/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rav/util.hpp"

namespace rav {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(LabelSpace space) : space_(std::move(space)) {
    counts_.assign(space_.size(), std::vector<long long>(space_.size() + 1, 0));
}

void ConfusionMatrix::add(const std::string& gold, const std::string& predicted) {
    auto g = space_.index_of(gold);
    if (!g) raise(Errc::UnknownLabel, "gold label '" + gold + "' not in space " + space_.name());
    auto p = space_.index_of(predicted);
    std::size_t col = p ? *p : space_.size();  // out-of-space lands in overflow
    counts_[*g][col]++;
    total_++;
}

long long ConfusionMatrix::at(std::size_t gold_idx, std::size_t pred_idx) const {
    return counts_.at(gold_idx).at(pred_idx);
}

long long ConfusionMatrix::overflow_total() const {
    long long n = 0;
    for (const auto& row : counts_) n += row.back();
    return n;
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream out;
    out << "gold\\pred";
    for (const auto& l : space_.labels()) out << ',' << l;
    out << ",__failed__\n";
    for (std::size_t g = 0; g < space_.size(); ++g) {
        out << space_.labels()[g];
        for (std::size_t p = 0; p <= space_.size(); ++p) out << ',' << counts_[g][p];
        out << '\n';
    }
    return out.str();
}

MetricsReport report_from_confusion(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.confusion = cm;
    r.n = cm.total();
    const auto& space = cm.space();
    const std::size_t k = space.size();

    double f1_sum = 0.0;
    long long correct = 0;
    for (std::size_t c = 0; c < k; ++c) {
        long long tp = cm.at(c, c);
        long long gold_total = 0;
        long long pred_total = 0;
        for (std::size_t p = 0; p <= k; ++p) gold_total += cm.at(c, p);
        for (std::size_t g = 0; g < k; ++g) pred_total += cm.at(g, c);
        correct += tp;

        ClassMetrics m;
        m.precision = pred_total > 0 ? static_cast<double>(tp) / static_cast<double>(pred_total) : 0.0;
        m.recall = gold_total > 0 ? static_cast<double>(tp) / static_cast<double>(gold_total) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                              : 0.0;
        f1_sum += m.f1;
        r.per_class[space.labels()[c]] = m;
    }
    // Macro averages over the full space, so absent classes still count.
    r.macro_f1 = k > 0 ? f1_sum / static_cast<double>(k) : 0.0;
    r.micro_f1 = r.n > 0 ? static_cast<double>(correct) / static_cast<double>(r.n) : 0.0;
    r.failure_rate = r.n > 0 ? static_cast<double>(cm.overflow_total()) / static_cast<double>(r.n) : 0.0;
    return r;
}

MetricsReport evaluate(const std::vector<ClaimResult>& results, const Dataset& gold) {
    std::unordered_map<std::string, const ClaimRecord*> gold_by_id;
    gold_by_id.reserve(gold.size());
    for (const auto& rec : gold.records()) gold_by_id[rec.id] = &rec;

    ConfusionMatrix cm(gold.space());
    std::unordered_set<std::string> seen;
    for (const auto& res : results) {
        auto it = gold_by_id.find(res.claim_id);
        if (it == gold_by_id.end()) {
            raise(Errc::UnknownClaimId, "result id '" + res.claim_id + "' not in gold dataset");
        }
        if (!seen.insert(res.claim_id).second) {
            raise(Errc::DuplicateClaimId, "result id '" + res.claim_id + "' appears twice");
        }
        cm.add(it->second->label, res.final_label);
    }
    if (seen.size() != gold.size()) {
        for (const auto& rec : gold.records()) {
            if (!seen.count(rec.id)) {
                raise(Errc::MissingPrediction, "gold id '" + rec.id + "' has no prediction");
            }
        }
    }
    return report_from_confusion(cm);
}

nlohmann::json report_to_json(const MetricsReport& r) {
    json per_class = json::object();
    for (const auto& [label, m] : r.per_class) {
        per_class[label] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    }
    return json{{"per_class", per_class}, {"macro_f1", r.macro_f1},
                {"micro_f1", r.micro_f1}, {"n", r.n},
                {"failure_rate", r.failure_rate}};
}

std::string report_to_table(const MetricsReport& r) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %9s %9s %9s\n", "label", "precision", "recall", "f1");
    out << buf;
    for (const auto& label : r.confusion.space().labels()) {
        const auto& m = r.per_class.at(label);
        std::snprintf(buf, sizeof(buf), "%-16s %9.4f %9.4f %9.4f\n", label.c_str(), m.precision,
                      m.recall, m.f1);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "macro-F1 %.4f\nmicro-F1 %.4f\nn %lld  failure_rate %.4f\n",
                  r.macro_f1, r.micro_f1, r.n, r.failure_rate);
    out << buf;
    return out.str();
}

// ---------------------------------------------------------------------------
// Fleiss' kappa

RatingMatrix::RatingMatrix(std::size_t items, std::size_t categories) {
    if (items < 1) raise(Errc::ConfigError, "rating matrix needs at least one item");
    if (categories < 1) raise(Errc::ConfigError, "rating matrix needs at least one category");
    counts_.assign(items, std::vector<long long>(categories, 0));
    category_names_.resize(categories);
    for (std::size_t c = 0; c < categories; ++c) category_names_[c] = "c" + std::to_string(c);
}

RatingMatrix RatingMatrix::from_labels(const std::vector<std::vector<std::string>>& rows) {
    if (rows.empty()) raise(Errc::ConfigError, "no rating rows");
    std::set<std::string> cats;
    for (const auto& row : rows) {
        if (row.size() != rows.front().size()) {
            raise(Errc::ConfigError, "rating rows have differing rater counts");
        }
        for (const auto& label : row) cats.insert(label);
    }
    std::vector<std::string> names(cats.begin(), cats.end());
    RatingMatrix m(rows.size(), names.size());
    m.category_names_ = names;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto& label : rows[i]) {
            auto it = std::find(names.begin(), names.end(), label);
            m.counts_[i][static_cast<std::size_t>(it - names.begin())]++;
        }
    }
    return m;
}

void RatingMatrix::set(std::size_t item, std::size_t category, long long count) {
    if (count < 0) raise(Errc::ConfigError, "negative rating count");
    counts_.at(item).at(category) = count;
}

long long RatingMatrix::at(std::size_t item, std::size_t category) const {
    return counts_.at(item).at(category);
}

long long RatingMatrix::raters_per_item() const {
    long long n = -1;
    for (const auto& row : counts_) {
        long long sum = 0;
        for (long long c : row) sum += c;
        if (n < 0) {
            n = sum;
        } else if (sum != n) {
            raise(Errc::ConfigError, "rating rows have differing rater counts");
        }
    }
    if (n < 2) raise(Errc::ConfigError, "fleiss kappa needs at least 2 raters per item");
    return n;
}

double fleiss_kappa(const RatingMatrix& m) {
    const auto N = static_cast<double>(m.items());
    const auto n = static_cast<double>(m.raters_per_item());
    const std::size_t q = m.categories();

    double p_bar = 0.0;
    std::vector<double> p_j(q, 0.0);
    for (std::size_t i = 0; i < m.items(); ++i) {
        double sum_sq = 0.0;
        for (std::size_t c = 0; c < q; ++c) {
            auto count = static_cast<double>(m.at(i, c));
            sum_sq += count * count;
            p_j[c] += count;
        }
        p_bar += (sum_sq - n) / (n * (n - 1.0));
    }
    p_bar /= N;

    double p_e = 0.0;
    for (std::size_t c = 0; c < q; ++c) {
        double share = p_j[c] / (N * n);
        p_e += share * share;
    }

    const double denom = 1.0 - p_e;
    if (denom == 0.0) {
        raise(Errc::DegenerateDistribution,
              "expected agreement is 1 (a single category is used everywhere)");
    }
    return (p_bar - p_e) / denom;
}

// ---------------------------------------------------------------------------
// Corpus statistics

long long count_tokens(const std::string& text) {
    long long n = 0;
    bool in_token = false;
    for (char c : text) {
        bool ws = std::isspace(static_cast<unsigned char>(c));
        if (!ws && !in_token) ++n;
        in_token = !ws;
    }
    return n;
}

long long count_sentences(const std::string& text) {
    long long n = 0;
    bool tail_content = false;  // non-space text since the last terminator
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            // Consume a terminator run; it counts when followed by
            // whitespace or end of text.
            std::size_t j = i;
            while (j + 1 < text.size() &&
                   (text[j + 1] == '.' || text[j + 1] == '!' || text[j + 1] == '?')) {
                ++j;
            }
            bool boundary = j + 1 >= text.size() ||
                            std::isspace(static_cast<unsigned char>(text[j + 1]));
            if (boundary && tail_content) {
                ++n;
                tail_content = false;
            }
            i = j;
            continue;
        }
        if (!std::isspace(static_cast<unsigned char>(c))) tail_content = true;
    }
    if (tail_content) ++n;  // unterminated final sentence
    return n;
}

namespace {

struct Accum {
    long long count = 0;
    long long tokens = 0;
    long long sentences = 0;
    long long bpe = 0;
};

double mean(long long total, long long count) {
    return count > 0 ? static_cast<double>(total) / static_cast<double>(count) : 0.0;
}

double length_reduction(double filtered_mean, double unfiltered_mean) {
    return 100.0 * (unfiltered_mean - filtered_mean) / unfiltered_mean;
}

}  // namespace

CorpusStats corpus_stats(const Dataset& filtered, const Dataset* unfiltered,
                         TokenCounter bpe_counter) {
    std::unordered_map<std::string, const ClaimRecord*> unfil_by_id;
    if (unfiltered) {
        if (unfiltered->size() != filtered.size()) {
            raise(Errc::IdMismatch, "filtered and unfiltered datasets differ in size");
        }
        for (const auto& r : unfiltered->records()) unfil_by_id[r.id] = &r;
        for (const auto& r : filtered.records()) {
            if (!unfil_by_id.count(r.id)) {
                raise(Errc::IdMismatch, "id '" + r.id + "' missing from unfiltered dataset");
            }
        }
    }

    const auto& space = filtered.space();
    std::vector<Accum> fil(space.size()), unfil(space.size());
    Accum fil_all, unfil_all;

    for (const auto& r : filtered.records()) {
        auto c = *space.index_of(r.label);
        auto add = [&](Accum& a, const std::string& evidence) {
            a.count++;
            a.tokens += count_tokens(evidence);
            a.sentences += count_sentences(evidence);
            if (bpe_counter) a.bpe += bpe_counter(evidence);
        };
        add(fil[c], r.evidence);
        add(fil_all, r.evidence);
        if (unfiltered) {
            const auto& u = *unfil_by_id.at(r.id);
            add(unfil[c], u.evidence);
            add(unfil_all, u.evidence);
        }
    }

    auto to_stats = [&](const Accum& a, const Accum* u) {
        ClassCorpusStats s;
        s.count = a.count;
        s.token_mean = mean(a.tokens, a.count);
        s.sentence_mean = mean(a.sentences, a.count);
        if (bpe_counter) s.bpe_mean = mean(a.bpe, a.count);
        if (u) {
            s.unfiltered_token_mean = mean(u->tokens, u->count);
            if (*s.unfiltered_token_mean != 0.0) {
                s.length_reduction_pct = length_reduction(s.token_mean, *s.unfiltered_token_mean);
            }
        }
        return s;
    };

    CorpusStats out;
    for (std::size_t c = 0; c < space.size(); ++c) {
        out.per_label.emplace_back(space.labels()[c],
                                   to_stats(fil[c], unfiltered ? &unfil[c] : nullptr));
    }
    out.overall = to_stats(fil_all, unfiltered ? &unfil_all : nullptr);
    return out;
}

std::string corpus_stats_to_table(const CorpusStats& s) {
    std::ostringstream out;
    const bool paired = s.overall.unfiltered_token_mean.has_value();
    const bool bpe = s.overall.bpe_mean.has_value();
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-16s %7s %10s %8s", "label", "count", "token_mu", "sent_mu");
    out << buf;
    if (bpe) out << "   bpe_mu";
    if (paired) out << "   unfil_mu      LR%";
    out << '\n';

    auto row = [&](const std::string& label, const ClassCorpusStats& c) {
        std::snprintf(buf, sizeof(buf), "%-16s %7lld %10.2f %8.2f", label.c_str(), c.count,
                      c.token_mean, c.sentence_mean);
        out << buf;
        if (bpe) {
            std::snprintf(buf, sizeof(buf), " %8.2f", c.bpe_mean.value_or(0.0));
            out << buf;
        }
        if (paired) {
            std::snprintf(buf, sizeof(buf), " %10.2f %8.2f", c.unfiltered_token_mean.value_or(0.0),
                          c.length_reduction_pct.value_or(0.0));
            out << buf;
        }
        out << '\n';
    };
    for (const auto& [label, c] : s.per_label) row(label, c);
    row("total", s.overall);
    return out.str();
}

// ---------------------------------------------------------------------------
// Reasoning-complexity profile

std::map<std::string, CategoryProfile> complexity_profile(
    const std::vector<ClaimResult>& results,
    const std::map<std::string, std::string>& category_of) {
    std::map<std::string, CategoryProfile> out;
    std::map<std::string, long long> totals;
    for (const auto& res : results) {
        auto it = category_of.find(res.claim_id);
        if (it == category_of.end()) {
            raise(Errc::MissingCategory, "claim id '" + res.claim_id + "' has no category");
        }
        auto& profile = out[it->second];
        for (const auto& t : res.trajectories) {
            if (!t.ok()) continue;
            auto len = static_cast<int>(t.history.size());
            profile.histogram[len]++;
            profile.n++;
            totals[it->second] += len;
        }
    }
    for (auto& [cat, profile] : out) {
        profile.mean_questions =
            profile.n > 0 ? static_cast<double>(totals[cat]) / static_cast<double>(profile.n) : 0.0;
    }
    return out;
}

}  // namespace rav
