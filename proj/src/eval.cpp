#include "jem/eval.hpp"

#include <algorithm>
#include <cmath>

namespace jem {

ReliabilityTable ece(const std::vector<double>& confidences,
                     const std::vector<char>& correct, int m_buckets) {
    if (confidences.size() != correct.size())
        throw DimensionError("ece: array length mismatch");
    if (confidences.empty()) throw DimensionError("ece: empty input");
    ReliabilityTable t;
    t.buckets.resize(m_buckets);
    std::vector<double> conf_sum(m_buckets, 0), acc_sum(m_buckets, 0);
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        double c = confidences[i];
        if (c < 0 || c > 1) throw DimensionError("ece: confidence outside [0,1]");
        int b = int(std::ceil(c * m_buckets));
        b = std::clamp(b, 1, m_buckets) - 1;
        t.buckets[b].count++;
        conf_sum[b] += c;
        acc_sum[b] += correct[i] ? 1.0 : 0.0;
    }
    const double n = double(confidences.size());
    for (int b = 0; b < m_buckets; ++b) {
        auto& bk = t.buckets[b];
        if (bk.count == 0) continue;
        bk.mean_confidence = conf_sum[b] / double(bk.count);
        bk.mean_accuracy = acc_sum[b] / double(bk.count);
        t.ece += (double(bk.count) / n) *
                 std::fabs(bk.mean_accuracy - bk.mean_confidence);
    }
    return t;
}

double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) throw DimensionError("auroc: empty score set");
    // rank-sum with midranks over the pooled sample
    struct Item {
        double v;
        bool is_pos;
    };
    std::vector<Item> all;
    all.reserve(pos.size() + neg.size());
    for (double v : pos) all.push_back({v, true});
    for (double v : neg) all.push_back({v, false});
    std::sort(all.begin(), all.end(),
              [](const Item& a, const Item& b) { return a.v < b.v; });
    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].v == all[i].v) ++j;
        double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (all[k].is_pos) rank_sum_pos += midrank;
        i = j;
    }
    const double np = double(pos.size()), nn = double(neg.size());
    return (rank_sum_pos - np * (np + 1) / 2.0) / (np * nn);
}

double score_logp(const JemModel& m, const Tensor& x_row) {
    return log_p_tilde(m, x_row);
}

double score_maxprob(const JemModel& m, const Tensor& x_row) {
    Tensor lp = log_p_y_given_x(m, x_row);
    double mx = lp.data[0];
    for (double v : lp.data) mx = std::max(mx, v);
    return std::exp(mx);
}

double approx_mass_from_grad(const Tensor& grad) { return -l2_norm(grad); }

double score_approx_mass(const JemModel& m, const Tensor& x_row) {
    return approx_mass_from_grad(grad_logp_x(m, x_row));
}

std::vector<double> score_batch(const JemModel& m, const Tensor& x,
                                const std::string& score_name) {
    double (*score)(const JemModel&, const Tensor&);
    if (score_name == "logp")
        score = score_logp;
    else if (score_name == "maxprob")
        score = score_maxprob;
    else if (score_name == "approx_mass")
        score = score_approx_mass;
    else
        throw ConfigError("unknown score: " + score_name);
    const std::size_t n = x.rows();
    std::vector<double> out(n);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < (long long)n; ++i) out[i] = score(m, x.row(i));
    return out;
}

std::vector<OodScoreReport> ood_report(const JemModel& m,
                                       const LabeledDataset& in_ds,
                                       const std::vector<LabeledDataset>& ood_sets,
                                       const std::vector<std::string>& scores,
                                       int hist_bins) {
    for (const auto& ood : ood_sets)
        if (ood.size() == 0) throw DimensionError("ood_report: empty OOD set");
    std::vector<OodScoreReport> reports;
    for (const auto& name : scores) {
        OodScoreReport rep;
        rep.score_name = name;
        rep.in_scores = score_batch(m, in_ds.inputs, name);
        double lo = *std::min_element(rep.in_scores.begin(), rep.in_scores.end());
        double hi = *std::max_element(rep.in_scores.begin(), rep.in_scores.end());
        for (const auto& ood : ood_sets) {
            rep.ood_names.push_back(ood.name);
            rep.ood_scores.push_back(score_batch(m, ood.inputs, name));
            for (double v : rep.ood_scores.back()) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            rep.aurocs.push_back(auroc(rep.in_scores, rep.ood_scores.back()));
        }
        if (hi == lo) hi = lo + 1;
        rep.bin_edges.resize(hist_bins + 1);
        for (int b = 0; b <= hist_bins; ++b)
            rep.bin_edges[b] = lo + (hi - lo) * b / hist_bins;
        auto histogram = [&](const std::vector<double>& vs) {
            std::vector<std::size_t> h(hist_bins, 0);
            for (double v : vs) {
                int b = int((v - lo) / (hi - lo) * hist_bins);
                h[std::clamp(b, 0, hist_bins - 1)]++;
            }
            return h;
        };
        rep.histograms.push_back(histogram(rep.in_scores));
        for (const auto& os : rep.ood_scores) rep.histograms.push_back(histogram(os));
        reports.push_back(std::move(rep));
    }
    return reports;
}

double accuracy(const JemModel& m, const LabeledDataset& ds) {
    if (ds.size() == 0) throw DimensionError("accuracy: empty dataset");
    Tensor logits = m.net.forward(ds.inputs);
    const std::size_t k = logits.cols();
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] < 0) continue;  // unlabeled rows don't count
        int best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (logits.at(i, c) > logits.at(i, best)) best = int(c);
        hits += best == ds.labels[i];
        ++total;
    }
    return total ? double(hits) / double(total) : 0.0;
}

void confidences(const JemModel& m, const LabeledDataset& ds,
                 std::vector<double>& conf, std::vector<char>& correct) {
    Tensor lp = log_p_y_given_x(m, ds.inputs);
    const std::size_t k = lp.cols();
    conf.clear();
    correct.clear();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (lp.at(i, c) > lp.at(i, best)) best = int(c);
        conf.push_back(std::exp(lp.at(i, best)));
        correct.push_back(best == ds.labels[i] ? 1 : 0);
    }
}

}  // namespace jem
