#include "swec/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace swec {
namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct LineReader {
  std::istream& is;
  const std::string& source;
  int line_no = 0;

  std::vector<std::string> next(std::size_t expected_cells) {
    std::string line;
    if (!std::getline(is, line)) fail("unexpected end of file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cells = split_csv(line);
    if (cells.size() != expected_cells)
      fail("expected " + std::to_string(expected_cells) + " fields, found " +
           std::to_string(cells.size()));
    return cells;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source + ":" + std::to_string(line_no) + ": " + what);
  }

  void expect(const std::vector<std::string>& cells, const std::vector<std::string>& want) const {
    if (cells != want) fail("unexpected header");
  }
};

}  // namespace

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(n);
}

ConfusionMatrix ConfusionMatrix::from_rows(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& rows) {
  ConfusionMatrix cm;
  for (int p = 0; p < kNumClasses; ++p)
    for (int t = 0; t < kNumClasses; ++t) {
      if (rows[p][t] < 0) throw ParameterError("negative confusion count");
      cm.counts(p, t) = rows[p][t];
    }
  return cm;
}

ConfusionMatrix confusion(std::span<const EventClass> predicted,
                          std::span<const EventClass> target) {
  if (predicted.size() != target.size() || predicted.empty())
    throw ParameterError("prediction and target sequences must be non-empty and equal length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    ++cm.counts(class_index(predicted[i]), class_index(target[i]));
  return cm;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> target) {
  if (predicted.size() != target.size() || predicted.empty())
    throw ParameterError("prediction and target sequences must be non-empty and equal length");
  std::vector<EventClass> p, t;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    p.push_back(class_from_code(predicted[i]));
    t.push_back(class_from_code(target[i]));
  }
  return confusion(p, t);
}

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall) {
  if (!precision || !recall || *precision + *recall == 0.0) return std::nullopt;
  return 2.0 * (*precision * *recall) / (*precision + *recall);
}

ClassMetrics class_metrics(const ConfusionMatrix& cm, EventClass c) {
  const int k = class_index(c);
  ClassMetrics m;
  m.event_class = c;
  m.tp = cm.counts(k, k);
  m.fp = cm.counts.row(k).sum() - m.tp;
  m.fn = cm.counts.col(k).sum() - m.tp;
  m.tn = cm.total() - m.tp - m.fp - m.fn;
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = f1_score(m.precision, m.recall);
  m.fpr = ratio(m.fp, m.fp + m.tn);
  return m;
}

MetricsReport aggregate(const ConfusionMatrix& cm) {
  if (cm.total() < 1) throw ParameterError("empty confusion matrix");
  MetricsReport r;
  r.confusion = cm;
  r.accuracy = cm.accuracy();

  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::array<double, 3> sum{};
  std::array<int, 3> defined{};
  for (EventClass c : kAllClasses) {
    const ClassMetrics m = class_metrics(cm, c);
    r.per_class[class_index(c)] = m;
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
    tn += m.tn;
    const std::array<std::optional<double>, 3> values = {m.precision, m.recall, m.fpr};
    for (int i = 0; i < 3; ++i) {
      if (values[i]) {
        sum[i] += *values[i];
        ++defined[i];
      } else {
        ++r.undefined_excluded;
      }
    }
  }
  auto mean = [&](int i) -> std::optional<double> {
    if (defined[i] == 0) return std::nullopt;
    return sum[i] / defined[i];
  };
  r.macro.precision = mean(0);
  r.macro.recall = mean(1);
  r.macro.fpr = mean(2);
  r.macro.f1 = f1_score(r.macro.precision, r.macro.recall);

  r.micro.precision = ratio(tp, tp + fp);
  r.micro.recall = ratio(tp, tp + fn);
  r.micro.f1 = f1_score(r.micro.precision, r.micro.recall);
  r.micro.fpr = ratio(fp, fp + tn);
  return r;
}

std::string format_percent(std::optional<double> fraction) {
  if (!fraction) return "NA";
  // Hundredths of a percent, half-up. The offset absorbs binary representation error
  // in values that are exact decimals such as 0.93355.
  const double hundredths = *fraction * 10000.0;
  const auto cents = static_cast<long long>(std::floor(hundredths + 0.5 + 1e-7));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", cents < 0 ? "-" : "", std::llabs(cents) / 100,
                std::llabs(cents) % 100);
  return buf;
}

void write_report_csv(std::ostream& os, const std::string& method, const MetricsReport& r) {
  os << "method,acc,pre_macro,rec_macro,f1_macro,fpr_macro\n";
  os << method << ',' << format_percent(r.accuracy) << ',' << format_percent(r.macro.precision)
     << ',' << format_percent(r.macro.recall) << ',' << format_percent(r.macro.f1) << ','
     << format_percent(r.macro.fpr) << '\n';
  os << "class,pre,rec,f1,fpr\n";
  for (const ClassMetrics& m : r.per_class)
    os << class_code(m.event_class) << ',' << format_percent(m.precision) << ','
       << format_percent(m.recall) << ',' << format_percent(m.f1) << ','
       << format_percent(m.fpr) << '\n';
  os << "confusion,t1,t2,t3,t4\n";
  for (int p = 0; p < kNumClasses; ++p) {
    os << 'p' << (p + 1);
    for (int t = 0; t < kNumClasses; ++t) os << ',' << r.confusion.counts(p, t);
    os << '\n';
  }
}

void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm) {
  for (int p = 0; p < kNumClasses; ++p) {
    for (int t = 0; t < kNumClasses; ++t) os << (t ? "," : "") << cm.counts(p, t);
    os << '\n';
  }
}

ParsedReport read_report_csv(std::istream& is, const std::string& source) {
  LineReader in{is, source};
  in.expect(in.next(6), {"method", "acc", "pre_macro", "rec_macro", "f1_macro", "fpr_macro"});
  const auto summary = in.next(6);
  const int summary_line = in.line_no;
  in.expect(in.next(5), {"class", "pre", "rec", "f1", "fpr"});
  std::array<std::vector<std::string>, kNumClasses> class_rows;
  std::array<int, kNumClasses> class_lines{};
  for (int c = 0; c < kNumClasses; ++c) {
    class_rows[c] = in.next(5);
    class_lines[c] = in.line_no;
    if (class_rows[c][0] != std::to_string(c + 1)) in.fail("expected class " + std::to_string(c + 1));
  }
  in.expect(in.next(5), {"confusion", "t1", "t2", "t3", "t4"});
  ConfusionMatrix cm;
  for (int p = 0; p < kNumClasses; ++p) {
    const auto cells = in.next(5);
    if (cells[0] != "p" + std::to_string(p + 1)) in.fail("expected predicted-class row label");
    for (int t = 0; t < kNumClasses; ++t) {
      const std::string& s = cells[t + 1];
      std::int64_t v = -1;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || v < 0)
        in.fail("invalid count '" + s + "'");
      cm.counts(p, t) = v;
    }
  }
  if (cm.total() < 1) in.fail("empty confusion matrix");

  ParsedReport out{summary[0], aggregate(cm)};
  const MetricsReport& r = out.report;
  auto check = [&](const std::string& printed, std::optional<double> value, int line) {
    if (printed != format_percent(value)) {
      in.line_no = line;
      in.fail("value '" + printed + "' disagrees with the confusion block (" +
              format_percent(value) + ")");
    }
  };
  check(summary[1], r.accuracy, summary_line);
  check(summary[2], r.macro.precision, summary_line);
  check(summary[3], r.macro.recall, summary_line);
  check(summary[4], r.macro.f1, summary_line);
  check(summary[5], r.macro.fpr, summary_line);
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassMetrics& m = r.per_class[c];
    check(class_rows[c][1], m.precision, class_lines[c]);
    check(class_rows[c][2], m.recall, class_lines[c]);
    check(class_rows[c][3], m.f1, class_lines[c]);
    check(class_rows[c][4], m.fpr, class_lines[c]);
  }
  return out;
}

}  // namespace swec
