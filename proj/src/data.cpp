#include "fedgia/data.hpp"

#include "fedgia/random.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace fedgia {

void SyntheticSpec::validate() const {
  if (m < 1) throw std::invalid_argument("synthetic spec: m must be >= 1");
  if (n < 1) throw std::invalid_argument("synthetic spec: n must be >= 1");
  if (d_min < 1) throw std::invalid_argument("synthetic spec: dmin must be >= 1");
  if (d_min > d_max) throw std::invalid_argument("synthetic spec: dmin must not exceed dmax");
}

FederatedProblem::FederatedProblem(std::vector<ClientDataset> clients, LossModel loss)
    : clients_(std::move(clients)), loss_(loss) {
  if (clients_.empty()) throw std::invalid_argument("problem needs at least one client");
  const auto n = clients_.front().dim();
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    const auto& c = clients_[i];
    if (c.dim() != n)
      throw std::invalid_argument("client " + std::to_string(i) + " has dimension " +
                                  std::to_string(c.dim()) + ", expected " + std::to_string(n));
    if (loss_.is_logistic()) {
      for (Eigen::Index j = 0; j < c.labels().size(); ++j) {
        const double b = c.labels()[j];
        if (b != 0.0 && b != 1.0)
          throw std::invalid_argument("client " + std::to_string(i) + " sample " +
                                      std::to_string(j) + ": logistic label " +
                                      std::to_string(b) + " is not 0 or 1");
      }
    }
  }
}

Eigen::Index FederatedProblem::total_samples() const {
  Eigen::Index d = 0;
  for (const auto& c : clients_) d += c.samples();
  return d;
}

double FederatedProblem::objective(const Vec& x) const {
  double sum = 0.0;
  for (const auto& c : clients_) sum += loss_value(loss_, c, x);
  return sum / m();
}

Vec FederatedProblem::gradient(const Vec& x) const {
  Vec sum = Vec::Zero(n());
  for (const auto& c : clients_) sum += loss_gradient(loss_, c, x);
  return sum / m();
}

namespace {

std::vector<ClientDataset> split_rows(const Mat& pooled_features, const Vec& pooled_labels,
                                      const std::vector<Eigen::Index>& order,
                                      const std::vector<Eigen::Index>& sizes) {
  std::vector<ClientDataset> clients;
  clients.reserve(sizes.size());
  Eigen::Index offset = 0;
  for (const auto size : sizes) {
    Mat a(size, pooled_features.cols());
    Vec b(size);
    for (Eigen::Index r = 0; r < size; ++r) {
      const auto src = order[static_cast<std::size_t>(offset + r)];
      a.row(r) = pooled_features.row(src);
      b[r] = pooled_labels[src];
    }
    clients.emplace_back(std::move(a), std::move(b));
    offset += size;
  }
  return clients;
}

}  // namespace

FederatedProblem generate_linear_noniid(const SyntheticSpec& spec, LossModel loss) {
  spec.validate();
  Sampler rng(spec.seed);

  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(spec.m));
  for (auto& s : sizes) s = rng.integer(spec.d_min, spec.d_max);
  const Eigen::Index d = std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0});

  // Thirds: normal, Student-t(5), uniform[-5,5]; the remainder goes to the normal block.
  const Eigen::Index third = d / 3;
  const Eigen::Index n_normal = third + d % 3;
  const Eigen::Index n_student = third;

  // Each sample's (a, b) is drawn jointly from its block's distribution.
  const Eigen::Index n = spec.n;
  Mat features(d, n);
  Vec labels(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    auto draw = [&]() {
      if (j < n_normal) return rng.normal();
      if (j < n_normal + n_student) return rng.student_t(5);
      return rng.uniform(-5.0, 5.0);
    };
    for (Eigen::Index l = 0; l < n; ++l) features(j, l) = draw();
    labels[j] = draw();
  }
  if (loss.is_logistic())
    for (auto& b : labels) b = b > 0.0 ? 1.0 : 0.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(std::span(order));

  return {split_rows(features, labels, order, sizes), loss};
}

FederatedProblem partition_dataset(const Mat& features, const Vec& labels, int m,
                                   std::uint64_t seed, LossModel loss) {
  const Eigen::Index d = features.rows();
  if (m < 1) throw std::invalid_argument("partition: m must be >= 1");
  if (labels.size() != d) throw std::invalid_argument("partition: label count mismatch");
  if (d < m)
    throw std::invalid_argument("partition: " + std::to_string(d) + " samples cannot fill " +
                                std::to_string(m) + " clients");

  Sampler rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(std::span(order));

  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(m), d / m);
  for (Eigen::Index i = 0; i < d % m; ++i) ++sizes[static_cast<std::size_t>(i)];
  return {split_rows(features, labels, order, sizes), loss};
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "csv") return DataFormat::Csv;
  if (name == "libsvm") return DataFormat::Libsvm;
  throw std::invalid_argument("unknown data format '" + std::string(name) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view token, std::size_t line) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc() || ptr != end)
    throw ParseError("cannot parse number '" + std::string(token) + "'", line);
  return value;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    ++line_no;
    fn(trim(line), line_no);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

LoadedData to_matrix(const std::vector<std::vector<double>>& rows, const std::vector<double>& y,
                     Eigen::Index n) {
  LoadedData out;
  out.features = Mat::Zero(static_cast<Eigen::Index>(rows.size()), n);
  out.labels = Vec(static_cast<Eigen::Index>(y.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    out.labels[static_cast<Eigen::Index>(r)] = y[r];
  }
  return out;
}

}  // namespace

LoadedData parse_csv(std::string_view text, const LoadOptions& options) {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  std::size_t columns = 0;
  bool header_pending = options.skip_header;

  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (line.empty()) return;
    if (header_pending) {
      header_pending = false;
      return;
    }
    std::vector<double> values;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      values.push_back(parse_number(line.substr(start, comma - start), line_no));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (values.size() < 2) throw ParseError("need at least one feature and a label", line_no);
    if (columns == 0) columns = values.size();
    if (values.size() != columns)
      throw ParseError("expected " + std::to_string(columns) + " columns, found " +
                           std::to_string(values.size()),
                       line_no);
    labels.push_back(values.back());
    values.pop_back();
    rows.push_back(std::move(values));
  });
  if (rows.empty()) throw ParseError("no data rows", 0);
  return to_matrix(rows, labels, static_cast<Eigen::Index>(columns - 1));
}

LoadedData parse_libsvm(std::string_view text, const LoadOptions& options) {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  Eigen::Index max_index = 0;

  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = trim(line.substr(0, hash));
    if (line.empty()) return;

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      const auto end = line.find_first_of(" \t", pos);
      const auto stop = end == std::string_view::npos ? line.size() : end;
      if (stop > pos) tokens.push_back(line.substr(pos, stop - pos));
      pos = stop;
    }

    labels.push_back(parse_number(tokens.front(), line_no));
    std::vector<double> row;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError("expected index:value, found '" + std::string(tokens[t]) + "'", line_no);
      const double idx_value = parse_number(tokens[t].substr(0, colon), line_no);
      const auto idx = static_cast<Eigen::Index>(idx_value);
      if (idx < 1 || static_cast<double>(idx) != idx_value)
        throw ParseError("feature index must be a positive integer", line_no);
      if (options.n_features > 0 && idx > options.n_features)
        throw ParseError("feature index " + std::to_string(idx) + " exceeds n=" +
                             std::to_string(options.n_features),
                         line_no);
      if (static_cast<std::size_t>(idx) > row.size()) row.resize(static_cast<std::size_t>(idx));
      row[static_cast<std::size_t>(idx - 1)] = parse_number(tokens[t].substr(colon + 1), line_no);
      max_index = std::max(max_index, idx);
    }
    rows.push_back(std::move(row));
  });
  if (rows.empty()) throw ParseError("no data rows", 0);
  const Eigen::Index n = options.n_features > 0 ? options.n_features : max_index;
  if (n < 1) throw ParseError("no features found", 0);
  return to_matrix(rows, labels, n);
}

LoadedData load_dataset(const std::filesystem::path& path, DataFormat format,
                        const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  return format == DataFormat::Csv ? parse_csv(text, options) : parse_libsvm(text, options);
}

bool normalize_logistic_labels(Vec& labels) {
  bool has_negative = false;
  for (const double b : labels) {
    if (b == -1.0)
      has_negative = true;
    else if (b != 0.0 && b != 1.0)
      throw std::invalid_argument("logistic label " + std::to_string(b) +
                                  " is not in {0, 1, -1, +1}");
  }
  if (!has_negative) return false;
  for (auto& b : labels)
    if (b == -1.0) b = 0.0;
  std::clog << "note: remapped logistic labels -1 -> 0\n";
  return true;
}

void write_client_csv(const std::filesystem::path& path, const ClientDataset& client) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  const Mat& a = client.features();
  char buf[32];
  auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      put(a(r, c));
      out.put(',');
    }
    put(client.labels()[r]);
    out.put('\n');
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::uint64_t fingerprint(const FederatedProblem& problem) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const double* data, Eigen::Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& c : problem.clients()) {
    feed(c.features().data(), c.features().size());
    feed(c.labels().data(), c.labels().size());
  }
  return h;
}

}  // namespace fedgia
