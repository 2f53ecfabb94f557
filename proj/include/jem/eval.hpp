#pragma once

#include <string>
#include <vector>

#include "jem/data.hpp"
#include "jem/energy.hpp"

namespace jem {

struct ReliabilityTable {
    struct Bucket {
        std::size_t count = 0;
        double mean_confidence = 0;
        double mean_accuracy = 0;
    };
    std::vector<Bucket> buckets;  // M equal-width buckets over (0,1]
    double ece = 0;
};

/// Expected calibration error with right-closed equal-width buckets:
/// bucket(conf) = ceil(conf*M) clamped to [1,M]; empty buckets contribute 0.
ReliabilityTable ece(const std::vector<double>& confidences,
                     const std::vector<char>& correct, int m_buckets = 20);

/// Probability a random positive score exceeds a random negative one, ties
/// counted half (exact rank-sum with midranks).
double auroc(const std::vector<double>& pos, const std::vector<double>& neg);

// OOD scores, higher = more in-distribution.
double score_logp(const JemModel& m, const Tensor& x_row);
double score_maxprob(const JemModel& m, const Tensor& x_row);
double score_approx_mass(const JemModel& m, const Tensor& x_row);
/// -||g||_2 for an externally supplied log-density gradient (analytic-energy
/// test path).
double approx_mass_from_grad(const Tensor& grad);

std::vector<double> score_batch(const JemModel& m, const Tensor& x,
                                const std::string& score_name);

struct OodScoreReport {
    std::string score_name;  // logp | maxprob | approx_mass
    std::vector<double> in_scores;
    std::vector<std::string> ood_names;
    std::vector<std::vector<double>> ood_scores;
    std::vector<double> aurocs;  // per OOD set
    // shared-range histograms: bin edges plus per-set counts (in first)
    std::vector<double> bin_edges;
    std::vector<std::vector<std::size_t>> histograms;
};

std::vector<OodScoreReport> ood_report(const JemModel& m,
                                       const LabeledDataset& in_ds,
                                       const std::vector<LabeledDataset>& ood_sets,
                                       const std::vector<std::string>& scores,
                                       int hist_bins = 40);

double accuracy(const JemModel& m, const LabeledDataset& ds);

/// Max-probability confidences and correctness flags for ECE.
void confidences(const JemModel& m, const LabeledDataset& ds,
                 std::vector<double>& conf, std::vector<char>& correct);

}  // namespace jem
