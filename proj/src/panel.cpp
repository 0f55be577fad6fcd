#include "longci/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "longci/error.hpp"

namespace longci {
namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(std::string_view s, std::size_t line) {
  if (s == "NA" || s == "nan" || s == "NaN") return std::nan("");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

std::uint8_t parse_flag(std::string_view s, std::size_t line) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw DataError("line " + std::to_string(line) + ": expected 0 or 1, got '" + std::string(s) + "'");
}

std::string join_grid(const Panel& p) {
  std::string s;
  for (std::size_t k = 0; k < p.t(); ++k) {
    if (k) s += ',';
    s += std::to_string(p.grid().empty() ? k + 1 : p.grid()[k]);
  }
  return s;
}

}  // namespace

Panel::Panel(Data data) : d_(std::move(data)) {
  const std::size_t n = d_.n, t = d_.t;
  if (t == 0) throw DataError("panel needs at least one time column");
  if (d_.delta < 1) throw DataError("panel delta must be >= 1");
  if (d_.v.size() != n * v_dim()) throw DataError("V has the wrong size");
  if (d_.l.size() != n * t * l_dim()) throw DataError("L has the wrong size");
  if (d_.a.size() != n * t) throw DataError("A has the wrong size");
  if (!d_.c.empty() && d_.c.size() != n * t) throw DataError("C has the wrong size");
  if (d_.y.size() != n) throw DataError("Y has the wrong size");
  if (!d_.weight.empty()) {
    if (d_.weight.size() != n) throw DataError("weights have the wrong size");
    for (double w : d_.weight) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("case weights must be finite and >= 0");
    }
  }
  if (!d_.grid.empty()) {
    if (d_.grid.size() != t) throw DataError("grid length differs from t");
    for (std::size_t k = 0; k < t; ++k) {
      if (d_.grid[k] < 1 || (k > 0 && d_.grid[k] <= d_.grid[k - 1])) {
        throw DataError("grid indices must be positive and strictly increasing");
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < t; ++k) {
      const auto a = d_.a[i * t + k];
      if (a > 1) throw DataError("treatment must be 0 or 1");
      if (k > 0 && a < d_.a[i * t + k - 1]) {
        throw DataError("subject " + std::to_string(i) + ": treatment switches off");
      }
      if (!d_.c.empty()) {
        const auto c = d_.c[i * t + k];
        if (c > 1) throw DataError("censoring must be 0 or 1");
        if (k > 0 && c < d_.c[i * t + k - 1]) {
          throw DataError("subject " + std::to_string(i) + ": censoring is not absorbing");
        }
      }
    }
  }
}

std::size_t Panel::jump_index(std::size_t i) const {
  for (std::size_t k = 0; k < d_.t; ++k) {
    if (a(i, k)) return k;
  }
  return d_.t;
}

Panel Panel::select(std::span<const std::size_t> subjects) const {
  Data out;
  out.n = subjects.size();
  out.t = d_.t;
  out.delta = d_.delta;
  out.grid = d_.grid;
  out.v_names = d_.v_names;
  out.l_names = d_.l_names;
  const std::size_t vd = v_dim(), row = d_.t * l_dim();
  out.v.reserve(out.n * vd);
  out.l.reserve(out.n * row);
  out.a.reserve(out.n * d_.t);
  if (has_censoring()) out.c.reserve(out.n * d_.t);
  out.y.reserve(out.n);
  if (has_case_weights()) out.weight.reserve(out.n);
  for (std::size_t i : subjects) {
    if (i >= d_.n) throw DataError("subject index out of range");
    out.v.insert(out.v.end(), d_.v.begin() + i * vd, d_.v.begin() + (i + 1) * vd);
    out.l.insert(out.l.end(), d_.l.begin() + i * row, d_.l.begin() + (i + 1) * row);
    out.a.insert(out.a.end(), d_.a.begin() + i * d_.t, d_.a.begin() + (i + 1) * d_.t);
    if (has_censoring()) {
      out.c.insert(out.c.end(), d_.c.begin() + i * d_.t, d_.c.begin() + (i + 1) * d_.t);
    }
    out.y.push_back(d_.y[i]);
    if (has_case_weights()) out.weight.push_back(d_.weight[i]);
  }
  Panel p;
  p.d_ = std::move(out);  // invariants already hold row by row
  return p;
}

void write_panel_csv(const Panel& panel, std::ostream& rows, std::ostream& outcomes) {
  rows << "# delta=" << panel.delta() << "\n# grid=" << join_grid(panel) << "\n";
  rows << "subject_id,t";
  for (const auto& name : panel.v_names()) rows << ',' << name;
  for (const auto& name : panel.l_names()) rows << ',' << name;
  rows << ",a";
  if (panel.has_censoring()) rows << ",c";
  rows << '\n';
  for (std::size_t i = 0; i < panel.n(); ++i) {
    const auto v = panel.v(i);
    for (std::size_t k = 0; k < panel.t(); ++k) {
      rows << (i + 1) << ',' << (panel.grid().empty() ? k + 1 : panel.grid()[k]);
      for (double x : v) rows << ',' << fmt(x);
      for (double x : panel.l(i, k)) rows << ',' << fmt(x);
      rows << ',' << panel.a(i, k);
      if (panel.has_censoring()) rows << ',' << (panel.censored(i, k) ? 1 : 0);
      rows << '\n';
    }
  }
  outcomes << "subject_id,y";
  if (panel.has_case_weights()) outcomes << ",weight";
  outcomes << '\n';
  for (std::size_t i = 0; i < panel.n(); ++i) {
    outcomes << (i + 1) << ',' << fmt(panel.y(i));
    if (panel.has_case_weights()) outcomes << ',' << fmt(panel.weight(i));
    outcomes << '\n';
  }
}

void write_panel_csv(const Panel& panel, const std::string& rows_path,
                     const std::string& outcomes_path) {
  std::ofstream rows(rows_path), outcomes(outcomes_path);
  if (!rows || !outcomes) throw DataError("cannot open panel output files");
  write_panel_csv(panel, rows, outcomes);
}

Panel read_panel_csv(std::istream& rows, std::istream& outcomes) {
  Panel::Data d;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  int delta = 1;
  std::vector<std::size_t> meta_grid;

  // column roles
  int col_id = -1, col_t = -1, col_a = -1, col_c = -1;
  std::vector<int> col_v, col_l;

  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> id_index;
  struct Row {
    std::size_t subject, time;
    std::vector<double> v, l;
    std::uint8_t a, c;
  };
  std::vector<Row> parsed;

  while (std::getline(rows, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      auto body = std::string_view(line).substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      if (body.starts_with("delta=")) {
        delta = static_cast<int>(parse_double(split(body.substr(6), ',')[0], lineno));
      } else if (body.starts_with("grid=")) {
        meta_grid.clear();
        for (auto f : split(body.substr(5), ',')) {
          meta_grid.push_back(static_cast<std::size_t>(parse_double(f, lineno)));
        }
      }
      continue;
    }
    const auto fields = split(line, ',');
    if (header.empty()) {
      for (std::size_t j = 0; j < fields.size(); ++j) {
        const std::string name(fields[j]);
        header.push_back(name);
        const int jj = static_cast<int>(j);
        if (name == "subject_id") col_id = jj;
        else if (name == "t") col_t = jj;
        else if (name == "a") col_a = jj;
        else if (name == "c") col_c = jj;
        else if (!name.empty() && name[0] == 'v') { col_v.push_back(jj); d.v_names.push_back(name); }
        else if (!name.empty() && name[0] == 'l') { col_l.push_back(jj); d.l_names.push_back(name); }
        else throw DataError("line " + std::to_string(lineno) + ": unknown column '" + name + "'");
      }
      if (col_id < 0 || col_t < 0 || col_a < 0) {
        throw DataError("panel rows need subject_id, t and a columns");
      }
      continue;
    }
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    Row r;
    const std::string id(fields[col_id]);
    auto it = id_index.find(id);
    if (it == id_index.end()) {
      it = id_index.emplace(id, ids.size()).first;
      ids.push_back(id);
    }
    r.subject = it->second;
    r.time = static_cast<std::size_t>(parse_double(fields[col_t], lineno));
    for (int j : col_v) r.v.push_back(parse_double(fields[j], lineno));
    for (int j : col_l) r.l.push_back(parse_double(fields[j], lineno));
    r.a = parse_flag(fields[col_a], lineno);
    r.c = col_c >= 0 ? parse_flag(fields[col_c], lineno) : 0;
    parsed.push_back(std::move(r));
  }
  if (ids.empty()) throw DataError("panel has no rows");

  // time axis from the first subject
  std::vector<std::size_t> times;
  for (const auto& r : parsed) {
    if (r.subject == 0) times.push_back(r.time);
  }
  std::sort(times.begin(), times.end());
  d.n = ids.size();
  d.t = times.size();
  d.delta = delta;
  const bool identity = [&] {
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] != k + 1) return false;
    }
    return true;
  }();
  if (!identity) d.grid = times;
  if (!meta_grid.empty() && meta_grid != times) {
    throw DataError("grid metadata disagrees with the t column");
  }

  const std::size_t vd = d.v_names.size(), ld = d.l_names.size();
  d.v.assign(d.n * vd, std::nan(""));
  d.l.assign(d.n * d.t * ld, std::nan(""));
  d.a.assign(d.n * d.t, 0);
  if (col_c >= 0) d.c.assign(d.n * d.t, 0);
  std::vector<std::size_t> seen(d.n * d.t, 0);
  for (const auto& r : parsed) {
    const auto pos = std::lower_bound(times.begin(), times.end(), r.time);
    if (pos == times.end() || *pos != r.time) {
      throw DataError("subject " + ids[r.subject] + " has a time not on the grid");
    }
    const std::size_t k = static_cast<std::size_t>(pos - times.begin());
    const std::size_t cell = r.subject * d.t + k;
    if (seen[cell]++) throw DataError("subject " + ids[r.subject] + " repeats a time");
    std::copy(r.v.begin(), r.v.end(), d.v.begin() + r.subject * vd);
    std::copy(r.l.begin(), r.l.end(), d.l.begin() + cell * ld);
    d.a[cell] = r.a;
    if (col_c >= 0) d.c[cell] = r.c;
  }
  for (std::size_t cell = 0; cell < seen.size(); ++cell) {
    if (!seen[cell]) throw DataError("subject " + ids[cell / d.t] + " is missing a time");
  }

  // outcomes
  d.y.assign(d.n, std::nan(""));
  std::vector<bool> have_y(d.n, false);
  bool header_done = false, has_weight = false;
  lineno = 0;
  while (std::getline(outcomes, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (!header_done) {
      if (fields.size() < 2 || fields[0] != "subject_id" || fields[1] != "y") {
        throw DataError("outcome file must start with subject_id,y");
      }
      has_weight = fields.size() == 3 && fields[2] == "weight";
      if (has_weight) d.weight.assign(d.n, 1.0);
      header_done = true;
      continue;
    }
    if (fields.size() != (has_weight ? 3u : 2u)) {
      throw DataError("outcome line " + std::to_string(lineno) + " has the wrong field count");
    }
    auto it = id_index.find(std::string(fields[0]));
    if (it == id_index.end()) {
      throw DataError("outcome for unknown subject " + std::string(fields[0]));
    }
    d.y[it->second] = parse_double(fields[1], lineno);
    if (has_weight) d.weight[it->second] = parse_double(fields[2], lineno);
    have_y[it->second] = true;
  }
  for (std::size_t i = 0; i < d.n; ++i) {
    if (!have_y[i]) throw DataError("no outcome row for subject " + ids[i]);
  }
  return Panel(std::move(d));
}

Panel read_panel_csv(const std::string& rows_path, const std::string& outcomes_path) {
  std::ifstream rows(rows_path), outcomes(outcomes_path);
  if (!rows) throw DataError("cannot open " + rows_path);
  if (!outcomes) throw DataError("cannot open " + outcomes_path);
  return read_panel_csv(rows, outcomes);
}

}  // namespace longci
