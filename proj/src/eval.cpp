#include "mstaog/eval.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "mstaog/error.hpp"

namespace mstaog {

Scalar ConfusionMatrix::accuracy() const {
  const int n = total();
  return n > 0 ? Scalar(counts.trace()) / n : 0;
}

std::vector<Scalar> ConfusionMatrix::per_class_accuracy() const {
  std::vector<Scalar> out;
  for (int c = 0; c < counts.rows(); ++c) {
    const int row = counts.row(c).sum();
    out.push_back(row > 0 ? Scalar(counts(c, c)) / row : 0);
  }
  return out;
}

EvalReport make_report(const std::vector<std::string>& vocabulary, std::vector<VideoResult> videos) {
  EvalReport r;
  r.vocabulary = vocabulary;
  r.confusion = ConfusionMatrix(int(vocabulary.size()));
  for (const auto& v : videos) {
    if (v.truth < 0 || v.truth >= int(vocabulary.size()) || v.predicted < 0 ||
        v.predicted >= int(vocabulary.size()))
      throw SizeError("make_report: label outside the vocabulary for " + v.id);
    r.confusion.add(v.truth, v.predicted);
  }
  r.videos = std::move(videos);
  return r;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "confusion.csv");
    if (!out) throw IngestError("cannot write " + (dir / "confusion.csv").string());
    out << "truth";
    for (const auto& n : report.vocabulary) out << ',' << n;
    out << '\n';
    for (int r = 0; r < report.confusion.counts.rows(); ++r) {
      out << report.vocabulary[r];
      for (int c = 0; c < report.confusion.counts.cols(); ++c) out << ',' << report.confusion.counts(r, c);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "scores.csv");
    out << std::setprecision(17) << "id,truth,predicted";
    for (const auto& n : report.vocabulary) out << ',' << n;
    out << '\n';
    for (const auto& v : report.videos) {
      out << v.id << ',' << report.vocabulary[v.truth] << ',' << report.vocabulary[v.predicted];
      for (Scalar s : v.scores) out << ',' << s;
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "summary.txt");
    out << std::setprecision(17);
    out << "videos " << report.confusion.total() << '\n';
    out << "accuracy " << report.confusion.accuracy() << '\n';
    const auto pc = report.confusion.per_class_accuracy();
    for (std::size_t c = 0; c < pc.size(); ++c)
      out << "class " << report.vocabulary[c] << ' ' << pc[c] << '\n';
  }
}

Scalar accuracy_from_scores(const std::filesystem::path& scores_csv) {
  std::ifstream in(scores_csv);
  if (!in) throw IngestError("cannot open " + scores_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(scores_csv.string(), 1, "empty score table");
  std::vector<std::string> header;
  {
    std::istringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(f);
  }
  if (header.size() < 4) throw ParseError(scores_csv.string(), 1, "no score columns");
  int n = 1, total = 0, correct = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (f.size() != header.size()) throw ParseError(scores_csv.string(), n, "column count mismatch");
    std::size_t best = 3;
    Scalar bv = std::stod(f[3]);
    for (std::size_t c = 4; c < f.size(); ++c) {
      const Scalar v = std::stod(f[c]);
      if (v > bv) {
        bv = v;
        best = c;
      }
    }
    ++total;
    if (header[best] == f[1]) ++correct;
  }
  return total > 0 ? Scalar(correct) / total : 0;
}

}  // namespace mstaog
