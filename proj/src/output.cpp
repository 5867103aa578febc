#include "emctl/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "emctl/errors.hpp"

namespace emctl {

using nlohmann::json;

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void header_block(std::string& out, const char* stem, int n) {
  for (int i = 0; i < n; ++i) {
    out += ',';
    out += stem;
    if (n > 1) out += std::to_string(i + 1);
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigurationError("cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw ConfigurationError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string trace_csv(const SimRecord& rec) {
  std::string out = "t";
  header_block(out, "q", rec.n_m);
  header_block(out, "p", rec.n_m);
  header_block(out, "xe", rec.n_e);
  const int nu = rec.inputs.empty() ? 0 : static_cast<int>(rec.inputs.front().size());
  header_block(out, "u", nu);
  out += ",Hd,err_norm\n";
  for (std::size_t k = 0; k < rec.size(); ++k) {
    put(out, rec.times[k]);
    for (int i = 0; i < rec.states[k].size(); ++i) out += ',', put(out, rec.states[k](i));
    for (int i = 0; i < nu; ++i) out += ',', put(out, rec.inputs[k](i));
    out += ',';
    if (rec.has_law()) put(out, rec.desired_energy[k]);
    out += ',';
    if (rec.has_reference()) put(out, rec.error_norms[k]);
    out += '\n';
  }
  return out;
}

std::string reference_csv(const SimRecord& rec, const DesiredTarget& target) {
  std::string out = "t";
  header_block(out, "q_star", rec.n_m);
  header_block(out, "p_star", rec.n_m);
  header_block(out, "xe_star", rec.n_e);
  out += '\n';
  for (double t : rec.times) {
    put(out, t);
    const Vector s = target.state(t);
    for (int i = 0; i < s.size(); ++i) out += ',', put(out, s(i));
    out += '\n';
  }
  return out;
}

json report_json(const ConditionReport& r) {
  json conditions = json::array();
  for (const auto& c : r.conditions) {
    conditions.push_back({{"name", c.name},
                          {"description", c.description},
                          {"status", to_string(c.status)},
                          {"margin", number_or_null(c.margin)},
                          {"detail", c.detail}});
  }
  json constants = json::object();
  for (const auto& [k, v] : r.constants) constants[k] = number_or_null(v);
  json j = {{"law", to_string(r.law)},
            {"certified", r.certified()},
            {"hard_failure", r.hard_failure},
            {"failed", r.failed()},
            {"conditions", conditions},
            {"constants", constants}};
  if (r.hard_failure) j["hard_failure_reason"] = r.hard_failure_reason;
  return j;
}

json metrics_json(const std::string& scenario, const CaseRun& run) {
  json j = {{"scenario", scenario},
            {"case", run.label},
            {"status", to_string(run.status)},
            {"law", run.law},
            {"method", run.method},
            {"certified", run.report.certified()},
            {"forced", run.forced},
            {"initial_state", std::vector<double>(run.eta0.data(), run.eta0.data() + run.eta0.size())}};
  if (!run.message.empty()) j["message"] = run.message;
  if (!run.report.certified()) j["failed_conditions"] = run.report.failed();
  if (run.record) {
    const auto& rec = *run.record;
    const auto& d = rec.diagnostics;
    j["samples"] = rec.size();
    j["aborted"] = rec.aborted;
    if (rec.aborted) j["abort_time"] = rec.abort_time;
    j["diagnostics"] = {{"accepted_steps", d.accepted},
                        {"rejected_steps", d.rejected},
                        {"rhs_evaluations", d.rhs_evaluations},
                        {"jacobian_evaluations", d.jacobian_evaluations},
                        {"newton_failures", d.newton_failures},
                        {"domain_rejections", d.domain_rejections},
                        {"smallest_step", d.smallest_step},
                        {"largest_step", d.largest_step}};
  }
  if (run.metrics) {
    const auto& m = *run.metrics;
    j["metrics"] = {{"final_error", m.final_error},
                    {"zero_crossings", m.zero_crossings},
                    {"peak_overshoot", m.peak_overshoot},
                    {"l2_norm", m.running_l2.empty() ? 0.0 : m.running_l2.back()},
                    {"fitted_rate", m.fitted_rate},
                    {"fit_r2", m.fit_r2},
                    {"fit_points", m.fit_points},
                    {"fit_r2_window", m.fit_r2_window},
                    {"noise_floor", run.noise_floor}};
  }
  return j;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = result.parameter +
                    ",ph_ok,hurwitz_ok,riccati_ok,gamma,eps,sigma,xi_sym_max,status,final_error,"
                    "zero_crossings,peak_overshoot,l2_norm,fitted_rate,fit_r2\n";
  for (const auto& p : result.points) {
    const auto& r = p.row;
    put(out, r.d_d);
    out += r.ph_ok ? ",1" : ",0";
    out += r.hurwitz_ok ? ",1" : ",0";
    out += r.riccati_ok ? ",1," : ",0,";
    put(out, r.gamma);
    out += ',';
    put(out, r.eps);
    out += ',';
    put(out, r.sigma);
    out += ',';
    put(out, r.xi_sym_max);
    out += ',' + to_string(p.run.status);
    if (p.run.metrics) {
      const auto& m = *p.run.metrics;
      out += ',', put(out, m.final_error);
      out += ',' + std::to_string(m.zero_crossings);
      out += ',', put(out, m.peak_overshoot);
      out += ',', put(out, m.running_l2.back());
      out += ',', put(out, m.fitted_rate);
      out += ',', put(out, m.fit_r2);
    } else {
      out += ",,,,,,";
    }
    out += '\n';
  }
  return out;
}

std::string plot_script(const std::string& title, const std::vector<std::string>& labels) {
  std::ostringstream os;
  os << "#!/usr/bin/env python3\n"
        "# Renders the traces next to this script: position with reference,\n"
        "# running L2 norm of the error, and the control input.\n"
        "import csv\n"
        "import os\n"
        "import sys\n"
        "\n"
        "import matplotlib\n"
        "matplotlib.use(\"Agg\")\n"
        "import matplotlib.pyplot as plt\n"
        "\n"
        "HERE = os.path.dirname(os.path.abspath(__file__))\n"
        "TITLE = " << json(title).dump() << "\n"
        "LABELS = " << json(labels).dump() << "\n"
        "\n"
        "\n"
        "def read(name):\n"
        "    with open(os.path.join(HERE, name), newline=\"\") as f:\n"
        "        rows = list(csv.reader(f))\n"
        "    head, body = rows[0], rows[1:]\n"
        "    return {h: [float(r[i]) if r[i] else float(\"nan\") for r in body] for i, h in enumerate(head)}\n"
        "\n"
        "\n"
        "def running_l2(t, e):\n"
        "    out, acc = [0.0], 0.0\n"
        "    for k in range(1, len(t)):\n"
        "        acc += 0.5 * (t[k] - t[k - 1]) * (e[k] ** 2 + e[k - 1] ** 2)\n"
        "        out.append(acc ** 0.5)\n"
        "    return out\n"
        "\n"
        "\n"
        "fig, (ax_q, ax_l2, ax_u) = plt.subplots(3, 1, figsize=(8, 9), sharex=True)\n"
        "ref_drawn = False\n"
        "for label in LABELS:\n"
        "    trace = read(label + \".csv\")\n"
        "    t = trace[\"t\"]\n"
        "    q_key = \"q\" if \"q\" in trace else \"q1\"\n"
        "    u_key = \"u\" if \"u\" in trace else \"u1\"\n"
        "    ax_q.plot(t, trace[q_key], label=label)\n"
        "    ax_l2.plot(t, running_l2(t, trace[\"err_norm\"]), label=label)\n"
        "    ax_u.plot(t, trace[u_key], label=label)\n"
        "    ref_path = os.path.join(HERE, label + \".reference.csv\")\n"
        "    if not ref_drawn and os.path.exists(ref_path):\n"
        "        ref = read(label + \".reference.csv\")\n"
        "        key = \"q_star\" if \"q_star\" in ref else \"q_star1\"\n"
        "        ax_q.plot(ref[\"t\"], ref[key], \"k--\", label=\"reference\")\n"
        "        ref_drawn = True\n"
        "ax_q.set_ylabel(\"q\")\n"
        "ax_l2.set_ylabel(\"running L2 norm of e\")\n"
        "ax_u.set_ylabel(\"u\")\n"
        "ax_u.set_xlabel(\"t [s]\")\n"
        "for ax in (ax_q, ax_l2, ax_u):\n"
        "    ax.grid(True, alpha=0.3)\n"
        "    ax.legend(loc=\"best\", fontsize=8)\n"
        "fig.suptitle(TITLE)\n"
        "fig.tight_layout()\n"
        "target = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, TITLE + \".png\")\n"
        "fig.savefig(target, dpi=150)\n"
        "print(target)\n";
  return os.str();
}

}  // namespace emctl
