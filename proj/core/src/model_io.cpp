#include "tlab/model_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "tlab/errors.hpp"
#include "tlab/text_io.hpp"

namespace tlab {

namespace {

void write_matrix(std::ostream& out, const Matrix& m) {
  out << "matrix " << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

void write_head(std::ostream& out, const char* role, const LinearHead& head) {
  out << "head " << role << ' ' << format_real(head.column_cap()) << ' '
      << format_real(head.output_cap()) << '\n';
  write_matrix(out, head.alpha());
}

std::string next_token(std::istream& in, const char* context) {
  std::string tok;
  if (!(in >> tok)) throw ContractViolation(std::string("read_model: unexpected end in ") + context);
  return tok;
}

double next_real(std::istream& in, const char* context) { return parse_real(next_token(in, context)); }

std::size_t next_count(std::istream& in, const char* context) {
  return std::stoull(next_token(in, context));
}

Matrix read_matrix(std::istream& in) {
  if (next_token(in, "matrix") != "matrix") throw ContractViolation("read_model: expected matrix");
  const std::size_t rows = next_count(in, "matrix");
  const std::size_t cols = next_count(in, "matrix");
  std::vector<double> entries(rows * cols);
  for (double& v : entries) v = next_real(in, "matrix");
  return Matrix(rows, cols, std::move(entries));
}

}  // namespace

void write_model(std::ostream& out, const ModelBundle& bundle) {
  out << "tlab-model 1\n";
  if (bundle.rep) {
    if (const auto* sub = std::get_if<SubspaceRep>(&*bundle.rep)) {
      out << "representation subspace\n";
      write_matrix(out, sub->basis());
    } else {
      const auto& mlp = std::get<MlpRep>(*bundle.rep);
      out << "representation mlp " << mlp.depth() << '\n';
      for (std::size_t p = 0; p < mlp.depth(); ++p) {
        out << "layer " << format_real(mlp.caps()[p]) << '\n';
        write_matrix(out, mlp.layers()[p]);
      }
    }
  }
  if (bundle.pretrain_head) write_head(out, "pretrain", *bundle.pretrain_head);
  if (bundle.downstream_head) write_head(out, "downstream", *bundle.downstream_head);
  if (bundle.covariates) {
    const CovariateSpec& c = *bundle.covariates;
    out << "covariates " << format_real(c.sigma_min()) << ' ' << format_real(c.sigma_max()) << ' '
        << format_real(c.norm_cap()) << '\n';
    write_matrix(out, c.sigma());
  }
  out << "end\n";
}

ModelBundle read_model(std::istream& in) {
  if (next_token(in, "header") != "tlab-model" || next_token(in, "header") != "1") {
    throw ContractViolation("read_model: not a tlab-model v1 file");
  }
  ModelBundle bundle;
  while (true) {
    const std::string section = next_token(in, "section");
    if (section == "end") break;
    if (section == "representation") {
      const std::string kind = next_token(in, "representation");
      if (kind == "subspace") {
        bundle.rep = SubspaceRep(read_matrix(in));
      } else if (kind == "mlp") {
        const std::size_t depth = next_count(in, "mlp");
        std::vector<Matrix> layers;
        std::vector<double> caps;
        for (std::size_t p = 0; p < depth; ++p) {
          if (next_token(in, "mlp") != "layer") throw ContractViolation("read_model: expected layer");
          caps.push_back(next_real(in, "layer"));
          layers.push_back(read_matrix(in));
        }
        bundle.rep = MlpRep(std::move(layers), std::move(caps));
      } else {
        throw ContractViolation("read_model: unknown representation kind '" + kind + "'");
      }
    } else if (section == "head") {
      const std::string role = next_token(in, "head");
      const double column_cap = next_real(in, "head");
      const double output_cap = next_real(in, "head");
      LinearHead head(read_matrix(in), column_cap, output_cap);
      if (role == "pretrain") bundle.pretrain_head = std::move(head);
      else if (role == "downstream") bundle.downstream_head = std::move(head);
      else throw ContractViolation("read_model: unknown head role '" + role + "'");
    } else if (section == "covariates") {
      const double lo = next_real(in, "covariates");
      const double hi = next_real(in, "covariates");
      const double cap = next_real(in, "covariates");
      bundle.covariates = CovariateSpec(read_matrix(in), lo, hi, cap);
    } else {
      throw ContractViolation("read_model: unknown section '" + section + "'");
    }
  }
  return bundle;
}

void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_model(out, bundle);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model(in);
}

ModelBundle truth_bundle(const GroundTruth& truth, const CovariateSpec& spec) {
  return ModelBundle{truth.rep, truth.pre_head, truth.down_head, spec};
}

GroundTruth truth_from_bundle(const ModelBundle& bundle) {
  if (!bundle.rep || !bundle.pretrain_head || !bundle.downstream_head) {
    throw ContractViolation("truth file needs a representation and both heads");
  }
  return GroundTruth{*bundle.rep, *bundle.pretrain_head, *bundle.downstream_head};
}

}  // namespace tlab
