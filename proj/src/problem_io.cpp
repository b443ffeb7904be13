#include "pdsplit/problem_io.hpp"

#include <fstream>

namespace pdsplit {

namespace {

Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const Json& j) {
  if (!j.is_array()) throw InvalidInput("expected a numeric array");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidInput(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

Json to_json(const LinearOperator& op) {
  if (op.is_identity()) return {{"type", "identity"}, {"n", op.in_dim()}};
  if (op.is_finite_difference())
    return {{"type", "finite_difference"}, {"n", op.in_dim()}, {"boundary", "neumann"}};
  if (op.is_stack()) {
    Json members = Json::array();
    for (const auto& m : op.members()) members.push_back(to_json(m));
    return {{"type", "stack"}, {"members", members}};
  }
  const Matrix& m = op.matrix();
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return {{"type", "dense"}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

LinearOperator operator_from_json(const Json& j) {
  const auto type = field(j, "type").get<std::string>();
  if (type == "identity") return LinearOperator::identity(field(j, "n").get<Index>());
  if (type == "finite_difference") {
    const auto boundary = j.value("boundary", std::string("neumann"));
    if (boundary != "neumann") throw InvalidInput("unsupported boundary rule '" + boundary + "'");
    return LinearOperator::finite_difference(field(j, "n").get<Index>());
  }
  if (type == "stack") {
    std::vector<LinearOperator> members;
    for (const auto& m : field(j, "members")) members.push_back(operator_from_json(m));
    return LinearOperator::stack(std::move(members));
  }
  if (type == "dense") {
    const auto& data = field(j, "data");
    if (!data.is_array() || data.empty()) throw InvalidInput("dense operator needs a non-empty 'data' array");
    const Index rows = static_cast<Index>(data.size());
    const Index cols = static_cast<Index>(data[0].size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      const Vector r = vector_from(data[static_cast<std::size_t>(i)]);
      if (r.size() != cols) throw InvalidInput("dense operator rows differ in length");
      m.row(i) = r.transpose();
    }
    return LinearOperator::dense(std::move(m));
  }
  throw InvalidInput("unknown operator type '" + type + "'");
}

Json to_json(const ConvexFunctionSpec& f) {
  Json j = {{"kind", std::string(to_string(f.kind))}, {"dim", f.dim}, {"scale", f.scale}};
  switch (f.kind) {
    case FunctionKind::GroupL12: j["blocks"] = f.blocks; break;
    case FunctionKind::Nuclear:
      j["rows"] = f.rows;
      j["cols"] = f.cols;
      break;
    case FunctionKind::IndicatorPoint: j["center"] = vector_json(f.center); break;
    case FunctionKind::IndicatorLInfBall:
    case FunctionKind::IndicatorL1Ball:
      j["center"] = vector_json(f.center);
      j["radius"] = f.radius;
      break;
    default: break;
  }
  return j;
}

ConvexFunctionSpec convex_from_json(const Json& j) {
  const auto kind = function_kind_from_string(field(j, "kind").get<std::string>());
  const double scale = j.value("scale", 1.0);
  switch (kind) {
    case FunctionKind::L1: return ConvexFunctionSpec::l1(field(j, "dim").get<Index>(), scale);
    case FunctionKind::LInf: return ConvexFunctionSpec::linf(field(j, "dim").get<Index>(), scale);
    case FunctionKind::Zero: return ConvexFunctionSpec::zero(field(j, "dim").get<Index>());
    case FunctionKind::GroupL12:
      return ConvexFunctionSpec::group_l12(field(j, "dim").get<Index>(),
                                           field(j, "blocks").get<std::vector<std::vector<Index>>>(), scale);
    case FunctionKind::Nuclear:
      return ConvexFunctionSpec::nuclear(field(j, "rows").get<Index>(), field(j, "cols").get<Index>(), scale);
    case FunctionKind::IndicatorPoint: return ConvexFunctionSpec::indicator_point(vector_from(field(j, "center")));
    case FunctionKind::IndicatorLInfBall:
      return ConvexFunctionSpec::indicator_linf_ball(vector_from(field(j, "center")), field(j, "radius").get<double>());
    case FunctionKind::IndicatorL1Ball:
      return ConvexFunctionSpec::indicator_l1_ball(vector_from(field(j, "center")), field(j, "radius").get<double>());
  }
  throw InvalidInput("unknown function kind");
}

Json to_json(const SmoothFunctionSpec& f) {
  if (f.is_zero()) return {{"kind", "zero"}, {"dim", f.dim}};
  return {{"kind", "quadratic"}, {"K", to_json(*f.K)}, {"b", vector_json(f.b)}};
}

SmoothFunctionSpec smooth_from_json(const Json& j) {
  const auto kind = field(j, "kind").get<std::string>();
  if (kind == "zero") return SmoothFunctionSpec::zero(field(j, "dim").get<Index>());
  if (kind == "quadratic") return SmoothFunctionSpec::quadratic(operator_from_json(field(j, "K")), vector_from(field(j, "b")));
  throw InvalidInput("unknown smooth kind '" + kind + "'");
}

Json to_json(const PDProblem& p) {
  Json blocks = Json::array();
  for (const auto& b : p.blocks)
    blocks.push_back({{"J", to_json(b.J)}, {"gstar", to_json(b.gstar)}, {"L", to_json(b.L)}, {"gamma", b.gamma}});
  return {{"R", to_json(p.R)}, {"F", to_json(p.F)}, {"blocks", blocks}, {"gamma_r", p.gamma_r}, {"theta", p.theta}};
}

PDProblem problem_from_json(const Json& j) {
  try {
    PDProblem p;
    p.R = convex_from_json(field(j, "R"));
    p.F = j.contains("F") ? smooth_from_json(j.at("F")) : SmoothFunctionSpec::zero(p.R.dim);
    for (const auto& b : j.value("blocks", Json::array())) {
      const auto L = operator_from_json(field(b, "L"));
      auto J = convex_from_json(field(b, "J"));
      auto g = b.contains("gstar") ? smooth_from_json(b.at("gstar")) : SmoothFunctionSpec::zero(L.out_dim());
      p.blocks.push_back(DualBlock{std::move(J), std::move(g), L, field(b, "gamma").get<double>()});
    }
    p.gamma_r = field(j, "gamma_r").get<double>();
    p.theta = j.value("theta", 1.0);
    p.validate();
    return p;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed problem JSON: ") + e.what());
  }
}

Json to_json(const PrimalDualPoint& z) {
  Json v = Json::array();
  for (const auto& vi : z.v) v.push_back(vector_json(vi));
  return {{"x", vector_json(z.x)}, {"v", v}};
}

PrimalDualPoint solution_from_json(const Json& j) {
  try {
    PrimalDualPoint z;
    z.x = vector_from(field(j, "x"));
    for (const auto& vi : j.value("v", Json::array())) z.v.push_back(vector_from(vi));
    return z;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed solution JSON: ") + e.what());
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace pdsplit
