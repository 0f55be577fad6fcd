#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "longci/error.hpp"
#include "longci/exactg.hpp"

namespace longci {
namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw DataError("mdp line " + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    fail(line, "bad number '" + tok + "'");
  }
  if (used != tok.size()) fail(line, "bad number '" + tok + "'");
  return v;
}

std::size_t to_index(const std::string& tok, std::size_t line) {
  const double v = to_double(tok, line);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    fail(line, "expected a non-negative integer, got '" + tok + "'");
  }
  return static_cast<std::size_t>(v);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

DiscreteMdp read_mdp(std::istream& in) {
  DiscreteMdp m;
  std::size_t s = 0;
  bool have_initial = false, have_outcome[2] = {false, false};
  std::string raw;
  std::size_t line = 0;

  auto state_index = [&](const std::string& label, std::size_t ln) -> std::size_t {
    for (std::size_t i = 0; i < s; ++i) {
      if (m.labels[i] == label) return i;
    }
    fail(ln, "unknown state '" + label + "'");
  };
  // 1-based time or '*' to 0-based columns
  auto times = [&](const std::string& tok, std::size_t first, std::size_t ln) {
    std::vector<std::size_t> out;
    if (tok == "*") {
      for (std::size_t k = first; k <= m.horizon; ++k) out.push_back(k - 1);
      return out;
    }
    const std::size_t t = to_index(tok, ln);
    if (t < first || t > m.horizon) fail(ln, "time " + tok + " out of range");
    out.push_back(t - 1);
    return out;
  };

  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ss(raw);
    std::vector<std::string> tok;
    for (std::string w; ss >> w;) tok.push_back(w);
    if (tok.empty()) continue;
    const std::string& key = tok[0];

    // values after ':' (or after the key when there is no colon)
    auto values = [&](std::size_t from) {
      std::vector<double> v;
      for (std::size_t i = from; i < tok.size(); ++i) v.push_back(to_double(tok[i], line));
      return v;
    };
    auto colon_at = [&](std::size_t pos) {
      if (tok.size() <= pos || tok[pos] != ":") fail(line, "expected ':' in " + key);
    };
    auto need_shape = [&] {
      if (m.horizon == 0 || s == 0) fail(line, "horizon and states must come first");
    };
    auto need_width = [&](const std::vector<double>& v) {
      if (v.size() != s) fail(line, "expected " + std::to_string(s) + " values");
    };

    if (key == "horizon") {
      if (tok.size() != 2) fail(line, "horizon takes one value");
      m.horizon = to_index(tok[1], line);
      if (m.horizon < 1) fail(line, "horizon must be >= 1");
    } else if (key == "states") {
      if (m.horizon == 0) fail(line, "horizon must come first");
      if (tok.size() < 2) fail(line, "states needs at least one label");
      m.labels.assign(tok.begin() + 1, tok.end());
      s = m.labels.size();
      m.transition.assign(m.horizon, {});
      for (std::size_t k = 1; k < m.horizon; ++k) {
        m.transition[k].assign(2, std::vector<double>(s * s, -1.0));
      }
      m.behavior.assign(m.horizon, std::vector<double>(s, -1.0));
      m.outcome.assign(2, std::vector<double>(s, 0.0));
    } else if (key == "effect_delay") {
      if (tok.size() != 2) fail(line, "effect_delay takes one value");
      m.omega = static_cast<int>(to_index(tok[1], line));
    } else if (key == "initial") {
      need_shape();
      m.initial = values(1);
      need_width(m.initial);
      have_initial = true;
    } else if (key == "transition") {
      need_shape();
      if (m.horizon < 2) fail(line, "no transitions with horizon 1");
      if (tok.size() < 5) fail(line, "transition <t|*> <a> <from> : <p...>");
      const auto ks = times(tok[1], 2, line);
      const std::size_t a = to_index(tok[2], line);
      if (a > 1) fail(line, "action must be 0 or 1");
      const std::size_t from = state_index(tok[3], line);
      colon_at(4);
      const auto v = values(5);
      need_width(v);
      for (std::size_t k : ks) {
        std::copy(v.begin(), v.end(), m.transition[k][a].begin() + from * s);
      }
    } else if (key == "behavior" || key == "censoring") {
      need_shape();
      if (tok.size() < 3) fail(line, key + " <t|*> : <values...>");
      const auto ks = times(tok[1], 1, line);
      colon_at(2);
      const auto v = values(3);
      need_width(v);
      auto& table = key == "behavior" ? m.behavior : m.censoring;
      if (table.empty()) table.assign(m.horizon, std::vector<double>(s, -1.0));
      for (std::size_t k : ks) table[k] = v;
    } else if (key == "outcome") {
      need_shape();
      if (tok.size() < 3) fail(line, "outcome <a> : <y...>");
      const std::size_t a = to_index(tok[1], line);
      if (a > 1) fail(line, "action must be 0 or 1");
      colon_at(2);
      m.outcome[a] = values(3);
      need_width(m.outcome[a]);
      have_outcome[a] = true;
    } else if (key == "death") {
      need_shape();
      if (tok.size() != 2) fail(line, "death takes one label");
      m.death = state_index(tok[1], line);
    } else if (key == "outcome_sd") {
      if (tok.size() != 2) fail(line, "outcome_sd takes one value");
      m.outcome_sd = to_double(tok[1], line);
    } else {
      fail(line, "unknown key '" + key + "'");
    }
  }
  if (m.horizon == 0 || s == 0) fail(line, "missing horizon or states");
  if (!have_initial) fail(line, "missing initial");
  if (!have_outcome[0] || !have_outcome[1]) fail(line, "missing outcome row");
  // a death row may be left out: it is absorbing
  if (m.death) {
    const std::size_t dd = *m.death;
    for (std::size_t k = 1; k < m.horizon; ++k) {
      for (int a = 0; a < 2; ++a) {
        double* row = m.transition[k][a].data() + dd * s;
        if (row[0] < 0) {
          for (std::size_t j = 0; j < s; ++j) row[j] = j == dd ? 1.0 : 0.0;
        }
      }
    }
    for (auto& row : m.behavior) {
      if (row[dd] < 0) row[dd] = 0.0;
    }
    for (auto& row : m.censoring) {
      if (row[dd] < 0) row[dd] = 0.0;
    }
  }
  for (std::size_t k = 1; k < m.horizon; ++k) {
    for (int a = 0; a < 2; ++a) {
      for (double p : m.transition[k][a]) {
        if (p < 0) fail(line, "transition table incomplete at t=" + std::to_string(k + 1));
      }
    }
  }
  for (std::size_t k = 0; k < m.horizon; ++k) {
    for (double p : m.behavior[k]) {
      if (p < 0) fail(line, "behavior missing at t=" + std::to_string(k + 1));
    }
    if (!m.censoring.empty()) {
      for (double p : m.censoring[k]) {
        if (p < 0) fail(line, "censoring missing at t=" + std::to_string(k + 1));
      }
    }
  }
  m.validate();
  return m;
}

DiscreteMdp read_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_mdp(in);
}

void write_mdp(const DiscreteMdp& m, std::ostream& out) {
  const std::size_t s = m.states();
  out << "horizon " << m.horizon << "\nstates";
  for (const auto& l : m.labels) out << ' ' << l;
  out << "\neffect_delay " << m.omega << "\ninitial";
  for (double p : m.initial) out << ' ' << fmt(p);
  out << '\n';
  if (m.death) out << "death " << m.labels[*m.death] << '\n';
  for (std::size_t k = 1; k < m.horizon; ++k) {
    for (int a = 0; a < 2; ++a) {
      for (std::size_t l = 0; l < s; ++l) {
        out << "transition " << k + 1 << ' ' << a << ' ' << m.labels[l] << " :";
        for (std::size_t j = 0; j < s; ++j) out << ' ' << fmt(m.p(k, a, l, j));
        out << '\n';
      }
    }
  }
  for (std::size_t k = 0; k < m.horizon; ++k) {
    out << "behavior " << k + 1 << " :";
    for (double p : m.behavior[k]) out << ' ' << fmt(p);
    out << '\n';
  }
  for (int a = 0; a < 2; ++a) {
    out << "outcome " << a << " :";
    for (double y : m.outcome[a]) out << ' ' << fmt(y);
    out << '\n';
  }
  for (std::size_t k = 0; k < m.censoring.size(); ++k) {
    out << "censoring " << k + 1 << " :";
    for (double h : m.censoring[k]) out << ' ' << fmt(h);
    out << '\n';
  }
  if (m.outcome_sd > 0) out << "outcome_sd " << fmt(m.outcome_sd) << '\n';
}

}  // namespace longci
