#include "ctcv/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "ctcv/error.hpp"

namespace ctcv {

void ConfusionMatrix::add(bool predicted_positive, bool actually_positive) {
  if (predicted_positive) {
    (actually_positive ? tp : fp) += 1;
  } else {
    (actually_positive ? fn : tn) += 1;
  }
}

double compute_auc(std::span<const ScoredSample> scores) {
  std::size_t positives = 0;
  for (const auto& s : scores) positives += s.positive ? 1 : 0;
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw InvalidArgument("AUC undefined: scores contain a single class");
  }
  // Mann-Whitney U from mid-ranks; tied groups share their average rank,
  // which counts each positive/negative tie as one half.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a].covid_probability < scores[b].covid_probability;
  });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() &&
           scores[order[j]].covid_probability == scores[order[i]].covid_probability) {
      group_pos += scores[order[j]].positive ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j, mean (i + 1 + j) / 2
    positive_rank_sum += static_cast<double>(group_pos) * static_cast<double>(i + 1 + j) / 2.0;
    i = j;
  }
  const double p = static_cast<double>(positives), n = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

MetricsReport compute_metrics(std::span<const ScoredSample> scores, double mean_loss,
                              double threshold) {
  if (scores.empty()) throw InvalidArgument("cannot compute metrics on an empty dataset");
  MetricsReport r;
  for (const auto& s : scores) r.confusion.add(s.covid_probability >= threshold, s.positive);
  r.accuracy = r.confusion.accuracy().value();
  r.precision = r.confusion.precision().value();
  r.recall = r.confusion.recall().value();
  r.f1 = r.confusion.f1().value();
  r.loss = mean_loss;
  const bool both = r.confusion.tp + r.confusion.fn > 0 && r.confusion.tn + r.confusion.fp > 0;
  if (both) r.auc = compute_auc(scores);
  return r;
}

std::string format_metrics(const MetricsReport& r) {
  std::ostringstream os;
  auto real = [&](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s %.6f\n", key, v);
    os << buf;
  };
  real("accuracy", r.accuracy);
  real("precision", r.precision);
  real("recall", r.recall);
  real("f1", r.f1);
  if (r.auc) real("auc", *r.auc);
  real("loss", r.loss);
  os << "tp " << r.confusion.tp << '\n'
     << "tn " << r.confusion.tn << '\n'
     << "fp " << r.confusion.fp << '\n'
     << "fn " << r.confusion.fn << '\n';
  return os.str();
}

MetricsReport parse_metrics(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw InvalidArgument("malformed metrics line '" + line + "'");
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw InvalidArgument(std::string("metrics file lacks '") + key + "'");
    return it->second;
  };
  MetricsReport r;
  try {
    r.accuracy = std::stod(get("accuracy"));
    r.precision = std::stod(get("precision"));
    r.recall = std::stod(get("recall"));
    r.f1 = std::stod(get("f1"));
    r.loss = std::stod(get("loss"));
    if (kv.count("auc")) r.auc = std::stod(kv["auc"]);
    r.confusion.tp = std::stoull(get("tp"));
    r.confusion.tn = std::stoull(get("tn"));
    r.confusion.fp = std::stoull(get("fp"));
    r.confusion.fn = std::stoull(get("fn"));
  } catch (const std::logic_error& e) {
    throw InvalidArgument(std::string("malformed metrics value: ") + e.what());
  }
  return r;
}

}  // namespace ctcv
