// Copyright 2026 The attnreg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <fstream>

#include "attnreg/error.hpp"
#include "attnreg/training.hpp"

namespace attnreg {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void row(std::ofstream& out, int id, const EvalReport& r) {
  out << id << ',' << stage_name(r.stage) << ',' << num(r.dice) << ',' << num(r.prec) << ',' << num(r.rec) << ','
      << num(r.assd_mm) << ',';
  if (r.jac) out << r.jac->nonpos_count << ',' << num(r.jac->nonpos_percent);
  else out << ',';
  out << '\n';
}

void add(StageSummary& s, const EvalReport& r) {
  s.dice += r.dice;
  s.prec += r.prec;
  s.rec += r.rec;
  s.assd_mm += r.assd_mm;
  if (r.jac) {
    s.jac_nonpos_count += r.jac->nonpos_count;
    s.jac_nonpos_percent += r.jac->nonpos_percent;
  }
}

void divide(StageSummary& s, int n) {
  if (n == 0) return;
  s.dice /= n;
  s.prec /= n;
  s.rec /= n;
  s.assd_mm /= n;
  s.jac_nonpos_percent /= n;
}

const char* const kStageColumns = "dice,prec,rec,assd_mm";

std::string stage_header(const char* stage) {
  std::string out;
  std::string cols = kStageColumns;
  std::size_t start = 0;
  while (start <= cols.size()) {
    const std::size_t end = std::min(cols.find(',', start), cols.size());
    out += std::string(",") + stage + "_" + cols.substr(start, end - start);
    start = end + 1;
  }
  return out;
}

std::string stage_cells(const StageSummary& s, bool present) {
  if (!present) return ",,,,";
  return "," + num(s.dice) + "," + num(s.prec) + "," + num(s.rec) + "," + num(s.assd_mm);
}

// Initial/Affine/Final column groups followed by the final Jacobian column.
std::string table_header(const char* first) {
  return first + stage_header("initial") + stage_header("affine") + stage_header("final") +
         ",final_jac_nonpos_percent\n";
}

std::string table_row(const std::string& label, const EvalSummary& s) {
  return label + stage_cells(s.initial, true) + stage_cells(s.affine, s.has_final) +
         stage_cells(s.final, s.has_final) + "," + (s.has_final ? num(s.final.jac_nonpos_percent) : "") + "\n";
}

Json stage_json(const StageSummary& s, bool jac) {
  Json j{{"dice", s.dice}, {"prec", s.prec}, {"rec", s.rec}, {"assd_mm", s.assd_mm}};
  if (jac) {
    j["jac_nonpos_count"] = s.jac_nonpos_count;
    j["jac_nonpos_percent"] = s.jac_nonpos_percent;
  }
  return j;
}

}  // namespace

EvalSummary summarize(const std::vector<PairEval>& evals, bool has_final) {
  EvalSummary s;
  s.pairs = static_cast<int>(evals.size());
  s.has_final = has_final;
  for (const PairEval& e : evals) {
    add(s.initial, e.initial);
    if (has_final) {
      add(s.affine, e.affine);
      add(s.final, e.final);
    }
  }
  divide(s.initial, s.pairs);
  divide(s.affine, s.pairs);
  divide(s.final, s.pairs);
  return s;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<PairEval>& evals, bool has_final) {
  auto out = open_csv(path);
  out << "pair_id,stage,dice,prec,rec,assd_mm,jac_nonpos_count,jac_nonpos_percent\n";
  for (const PairEval& e : evals) {
    row(out, e.pair_id, e.initial);
    if (has_final) {
      row(out, e.pair_id, e.affine);
      row(out, e.pair_id, e.final);
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_summary_csv(const std::filesystem::path& path, const EvalSummary& s) {
  auto out = open_csv(path);
  out << table_header("class") << table_row("synthetic", s);
  if (!out) throw IoError("failed writing " + path.string());
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  auto out = open_csv(path);
  out << table_header("method");
  for (const AblationRow& r : rows) out << table_row(r.label, r.summary);
  if (!out) throw IoError("failed writing " + path.string());
}

Json to_json(const EvalSummary& s) {
  Json j{{"pairs", s.pairs}, {"initial", stage_json(s.initial, false)}};
  if (s.has_final) {
    j["affine"] = stage_json(s.affine, false);
    j["final"] = stage_json(s.final, true);
  }
  return j;
}

}  // namespace attnreg
