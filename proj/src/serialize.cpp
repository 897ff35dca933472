#include "agler/serialize.hpp"

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>

namespace agler {

namespace {

const Json& require_field(const Json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'");
    return *it;
}

double as_finite_double(const Json& j, const char* what) {
    if (!j.is_number()) throw ParseError(std::string(what) + ": expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(std::string(what) + ": non-finite value");
    return v;
}

Json vector_json(const CVector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_json(v(i)));
    return out;
}

CVector vector_from(const Json& j) {
    if (!j.is_array()) throw ParseError("vector: expected an array");
    CVector v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from(j[i]);
    return v;
}

std::string tag_name(InterpolationProblem::ClassTag t) {
    switch (t) {
        case InterpolationProblem::ClassTag::classical_disk: return "classical_disk";
        case InterpolationProblem::ClassTag::constrained_hardy: return "constrained_hardy";
        case InterpolationProblem::ClassTag::polydisk: return "polydisk";
        case InterpolationProblem::ClassTag::custom: return "custom";
    }
    return "custom";
}

InterpolationProblem::ClassTag tag_from(const std::string& s) {
    if (s == "classical_disk") return InterpolationProblem::ClassTag::classical_disk;
    if (s == "constrained_hardy") return InterpolationProblem::ClassTag::constrained_hardy;
    if (s == "polydisk") return InterpolationProblem::ClassTag::polydisk;
    if (s == "custom") return InterpolationProblem::ClassTag::custom;
    throw ParseError("unknown class tag '" + s + "'");
}

std::string family_kind_name(FamilySpec::Kind k) {
    switch (k) {
        case FamilySpec::Kind::disk: return "disk";
        case FamilySpec::Kind::polydisk: return "polydisk";
        case FamilySpec::Kind::constrained: return "constrained";
    }
    return "disk";
}

FamilySpec::Kind family_kind_from(const std::string& s) {
    if (s == "disk") return FamilySpec::Kind::disk;
    if (s == "polydisk") return FamilySpec::Kind::polydisk;
    if (s == "constrained") return FamilySpec::Kind::constrained;
    throw ParseError("unknown family kind '" + s + "'");
}

Json family_spec_json(const FamilySpec& f) {
    Json j;
    j["kind"] = family_kind_name(f.kind);
    j["domain_dim"] = f.domain_dim;
    j["block_dim"] = f.block_dim;
    j["count"] = f.count;
    j["seed"] = f.seed;
    j["include_antipodal"] = f.include_antipodal;
    return j;
}

FamilySpec family_spec_from(const Json& j) {
    FamilySpec f;
    f.kind = family_kind_from(require_field(j, "kind").get<std::string>());
    if (j.contains("domain_dim")) f.domain_dim = j["domain_dim"].get<int>();
    if (j.contains("block_dim")) f.block_dim = j["block_dim"].get<int>();
    if (j.contains("count")) f.count = j["count"].get<int>();
    if (j.contains("seed")) f.seed = j["seed"].get<unsigned long long>();
    if (j.contains("include_antipodal")) f.include_antipodal = j["include_antipodal"].get<bool>();
    return f;
}

}  // namespace

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Complex complex_from(const Json& j) {
    if (!j.is_array() || j.size() != 2)
        throw ParseError("complex number: expected a [re, im] pair");
    return {as_finite_double(j[0], "complex re"), as_finite_double(j[1], "complex im")};
}

Json matrix_json(const CMatrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix matrix_from(const Json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("matrix: expected a non-empty array of rows");
    const size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty()) throw ParseError("matrix: rows must be non-empty arrays");
    const size_t cols = j[0].size();
    CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ParseError("matrix: ragged rows");
        for (size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = complex_from(j[r][c]);
    }
    return m;
}

Json point_json(const Point& p) {
    if (p.size() == 1) return complex_json(p(0));
    Json out = Json::array();
    for (Eigen::Index c = 0; c < p.size(); ++c) out.push_back(complex_json(p(c)));
    return out;
}

Point point_from(const Json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("point: expected a coordinate array");
    if (j[0].is_number()) return make_point(complex_from(j));
    Point p(static_cast<Eigen::Index>(j.size()));
    for (size_t c = 0; c < j.size(); ++c) p(static_cast<Eigen::Index>(c)) = complex_from(j[c]);
    return p;
}

Json measure_json(const QuantumMeasure& mu) {
    Json j;
    Json pts = Json::array();
    for (Complex t : mu.points) pts.push_back(complex_json(t));
    j["points"] = std::move(pts);
    Json ws = Json::array();
    for (const CMatrix& w : mu.weights) ws.push_back(matrix_json(w));
    j["weights"] = std::move(ws);
    return j;
}

QuantumMeasure measure_from(const Json& j) {
    QuantumMeasure mu;
    for (const Json& p : require_field(j, "points")) mu.points.push_back(complex_from(p));
    for (const Json& w : require_field(j, "weights")) mu.weights.push_back(matrix_from(w));
    if (mu.points.size() != mu.weights.size())
        throw ParseError("measure: points and weights must align");
    return mu;
}

Json testfn_json(const TestFunction& f) {
    Json j;
    switch (f.kind()) {
        case TestFunction::Kind::disk:
            j["kind"] = "disk";
            break;
        case TestFunction::Kind::polydisk:
            j["kind"] = "polydisk";
            j["coordinate"] = f.coordinate_index();
            j["domain_dim"] = f.input_dim();
            break;
        case TestFunction::Kind::constrained:
            j["kind"] = "constrained";
            j["measure"] = measure_json(f.measure());
            break;
        case TestFunction::Kind::tabulated: {
            j["kind"] = "tabulated";
            Json nodes = Json::array();
            for (const Point& p : f.table_nodes()) nodes.push_back(point_json(p));
            j["nodes"] = std::move(nodes);
            Json values = Json::array();
            for (const CMatrix& v : f.table_values()) values.push_back(matrix_json(v));
            j["values"] = std::move(values);
            break;
        }
    }
    return j;
}

TestFunction testfn_from(const Json& j) {
    std::string kind = require_field(j, "kind").get<std::string>();
    if (kind == "disk") return TestFunction::disk_coordinate();
    if (kind == "polydisk")
        return TestFunction::polydisk_coordinate(require_field(j, "coordinate").get<int>(),
                                                 require_field(j, "domain_dim").get<int>());
    if (kind == "constrained")
        return TestFunction::constrained_extreme(measure_from(require_field(j, "measure")));
    if (kind == "tabulated") {
        std::vector<Point> nodes;
        for (const Json& p : require_field(j, "nodes")) nodes.push_back(point_from(p));
        std::vector<CMatrix> values;
        for (const Json& v : require_field(j, "values")) values.push_back(matrix_from(v));
        return TestFunction::tabulated(std::move(nodes), std::move(values));
    }
    throw ParseError("unknown test function kind '" + kind + "'");
}

Json kernel_json(const FiniteKernel& k) {
    Json j;
    Json nodes = Json::array();
    for (const Point& p : k.nodes) nodes.push_back(point_json(p));
    j["nodes"] = std::move(nodes);
    j["block_dim"] = k.block_dim;
    Json values = Json::array();
    for (const CMatrix& v : k.values) values.push_back(matrix_json(v));
    j["values"] = std::move(values);
    return j;
}

FiniteKernel kernel_from(const Json& j) {
    FiniteKernel k;
    for (const Json& p : require_field(j, "nodes")) k.nodes.push_back(point_from(p));
    k.block_dim = require_field(j, "block_dim").get<int>();
    for (const Json& v : require_field(j, "values")) k.values.push_back(matrix_from(v));
    if (k.values.size() != k.nodes.size() * k.nodes.size())
        throw ParseError("kernel: expected one value block per node pair");
    return k;
}

ProblemFile problem_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("problem: expected an object");
    std::string version = require_field(j, "schema_version").get<std::string>();
    if (version != kSchemaVersion)
        throw ParseError("unsupported schema_version '" + version + "'");

    ProblemFile p;
    p.problem.tag = tag_from(require_field(j, "class").get<std::string>());
    if (j.contains("domain_dim")) p.problem.domain_dim = j["domain_dim"].get<int>();
    if (j.contains("block_dim")) p.problem.block_dim = j["block_dim"].get<int>();
    for (const Json& node : require_field(j, "nodes")) p.problem.nodes.push_back(point_from(node));
    for (const Json& v : require_field(j, "values")) p.problem.values.push_back(matrix_from(v));
    if (p.problem.nodes.size() != p.problem.values.size())
        throw ParseError("problem: nodes and values must align");
    for (const Point& node : p.problem.nodes)
        if (node.size() != p.problem.domain_dim)
            throw ParseError("problem: node dimension does not match domain_dim");
    for (const CMatrix& v : p.problem.values)
        if (v.rows() != p.problem.block_dim || v.cols() != p.problem.block_dim)
            throw ParseError("problem: value blocks must be block_dim square");

    if (j.contains("family")) {
        p.family = family_spec_from(j["family"]);
        p.family_given = true;
    }
    if (j.contains("kernel_family"))
        for (const Json& k : j["kernel_family"]) p.kernel_family.push_back(kernel_from(k));

    if (j.contains("options")) {
        const Json& o = j["options"];
        if (o.contains("tol")) p.options.tol = as_finite_double(o["tol"], "options.tol");
        if (o.contains("max_iters")) p.options.max_iters = o["max_iters"].get<long>();
        if (o.contains("multiplicity")) p.options.multiplicity = o["multiplicity"].get<int>();
        if (o.contains("sphere_samples")) p.options.sphere_samples = o["sphere_samples"].get<long>();
        if (o.contains("y_samples")) p.options.y_samples = o["y_samples"].get<int>();
        if (o.contains("seed")) p.options.seed = o["seed"].get<unsigned long long>();
    }
    return p;
}

Json problem_to_json(const ProblemFile& p) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["class"] = tag_name(p.problem.tag);
    j["domain_dim"] = p.problem.domain_dim;
    j["block_dim"] = p.problem.block_dim;
    Json nodes = Json::array();
    for (const Point& node : p.problem.nodes) nodes.push_back(point_json(node));
    j["nodes"] = std::move(nodes);
    Json values = Json::array();
    for (const CMatrix& v : p.problem.values) values.push_back(matrix_json(v));
    j["values"] = std::move(values);
    if (p.family_given) j["family"] = family_spec_json(p.family);
    if (!p.kernel_family.empty()) {
        Json ks = Json::array();
        for (const FiniteKernel& k : p.kernel_family) ks.push_back(kernel_json(k));
        j["kernel_family"] = std::move(ks);
    }
    Json o = Json::object();
    if (p.options.tol) o["tol"] = *p.options.tol;
    if (p.options.max_iters) o["max_iters"] = *p.options.max_iters;
    if (p.options.multiplicity) o["multiplicity"] = *p.options.multiplicity;
    if (p.options.sphere_samples) o["sphere_samples"] = *p.options.sphere_samples;
    if (p.options.y_samples) o["y_samples"] = *p.options.y_samples;
    if (p.options.seed) o["seed"] = *p.options.seed;
    if (!o.empty()) j["options"] = std::move(o);
    return j;
}

Json provenance_json(const Provenance& p) {
    Json j;
    j["input_hash"] = p.input_hash;
    j["seed"] = p.seed;
    j["tool_version"] = p.tool_version;
    j["status"] = p.status;
    j["residual"] = p.residual;
    j["iterations"] = p.iterations;
    j["timestamp"] = p.timestamp;
    return j;
}

Json check_report_json(const CheckReport& r) {
    Json j;
    switch (r.verdict) {
        case Verdict::feasible: j["verdict"] = "feasible"; break;
        case Verdict::infeasible: j["verdict"] = "infeasible"; break;
        case Verdict::undecided: j["verdict"] = "undecided"; break;
    }
    j["samples_used"] = r.samples_used;
    j["min_eig_seen"] = r.min_eig_seen;
    j["vacuous"] = r.vacuous;
    if (r.witness) {
        Json w;
        if (r.witness->alpha.size()) w["alpha"] = vector_json(r.witness->alpha);
        if (r.witness->beta.size()) w["beta"] = vector_json(r.witness->beta);
        if (!r.witness->y.empty()) {
            Json ys = Json::array();
            for (const CMatrix& y : r.witness->y) ys.push_back(matrix_json(y));
            w["y"] = std::move(ys);
        }
        w["pick"] = matrix_json(r.witness->pick);
        w["min_eigenvalue"] = r.witness->report.min_eigenvalue;
        w["kernel_index"] = r.witness->kernel_index;
        j["witness"] = std::move(w);
    }
    return j;
}

namespace {

Json decomposition_problem_json(const DecompositionProblem& p) {
    Json j;
    Json nodes = Json::array();
    for (const Point& node : p.nodes) nodes.push_back(point_json(node));
    j["nodes"] = std::move(nodes);
    Json samples = Json::array();
    for (const CMatrix& s : p.samples) samples.push_back(matrix_json(s));
    j["samples"] = std::move(samples);
    Json family = Json::array();
    for (const TestFunction& f : p.family) family.push_back(testfn_json(f));
    j["family"] = std::move(family);
    j["multiplicity"] = p.multiplicity;
    j["tol"] = p.tol;
    j["max_iters"] = p.max_iters;
    j["psd_tol"] = p.psd_tol;
    j["plateau_window"] = p.plateau_window;
    j["plateau_rel"] = p.plateau_rel;
    return j;
}

DecompositionProblem decomposition_problem_from(const Json& j) {
    DecompositionProblem p;
    for (const Json& node : require_field(j, "nodes")) p.nodes.push_back(point_from(node));
    for (const Json& s : require_field(j, "samples")) p.samples.push_back(matrix_from(s));
    for (const Json& f : require_field(j, "family")) p.family.push_back(testfn_from(f));
    p.multiplicity = require_field(j, "multiplicity").get<int>();
    p.tol = as_finite_double(require_field(j, "tol"), "tol");
    p.max_iters = require_field(j, "max_iters").get<long>();
    p.psd_tol = as_finite_double(require_field(j, "psd_tol"), "psd_tol");
    p.plateau_window = require_field(j, "plateau_window").get<long>();
    p.plateau_rel = as_finite_double(require_field(j, "plateau_rel"), "plateau_rel");
    return p;
}

}  // namespace

Json evidence_json(const SeparationEvidence& e) {
    Json j;
    j["functional"] = matrix_json(e.functional);
    j["nodes"] = e.nodes;
    j["block_dim"] = e.block_dim;
    j["margin"] = e.margin;
    j["generator_floor"] = e.generator_floor;
    j["residual"] = e.residual;
    j["iterations"] = e.iterations;
    return j;
}

SeparationEvidence evidence_from(const Json& j) {
    SeparationEvidence e;
    e.functional = matrix_from(require_field(j, "functional"));
    e.nodes = require_field(j, "nodes").get<int>();
    e.block_dim = require_field(j, "block_dim").get<int>();
    e.margin = as_finite_double(require_field(j, "margin"), "margin");
    e.generator_floor = as_finite_double(require_field(j, "generator_floor"), "generator_floor");
    e.residual = as_finite_double(require_field(j, "residual"), "residual");
    e.iterations = require_field(j, "iterations").get<long>();
    return e;
}

Json decomposition_artifact_json(const DecompositionProblem& problem,
                                 const DecompositionOutcome& outcome, const Provenance& prov) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "decomposition";
    j["problem"] = decomposition_problem_json(problem);
    switch (outcome.status) {
        case SolveStatus::feasible: j["status"] = "feasible"; break;
        case SolveStatus::infeasible: j["status"] = "infeasible"; break;
        case SolveStatus::undecided: j["status"] = "undecided"; break;
    }
    j["residual"] = outcome.residual;
    j["iterations"] = outcome.iterations;
    if (outcome.decomposition) {
        const AglerDecomposition& d = *outcome.decomposition;
        Json grams = Json::array();
        for (const CMatrix& g : d.grams) grams.push_back(matrix_json(g));
        j["grams"] = std::move(grams);
        Json factors = Json::array();
        for (const auto& channel : d.factors) {
            Json per_node = Json::array();
            for (const CMatrix& h : channel) per_node.push_back(matrix_json(h));
            factors.push_back(std::move(per_node));
        }
        j["factors"] = std::move(factors);
        j["multiplicities"] = d.multiplicities;
    }
    if (outcome.evidence) j["evidence"] = evidence_json(*outcome.evidence);
    j["provenance"] = provenance_json(prov);
    return j;
}

LoadedDecomposition decomposition_artifact_from(const Json& j) {
    if (!j.is_object()) throw ParseError("artifact: expected an object");
    std::string version = require_field(j, "schema_version").get<std::string>();
    if (version != kSchemaVersion)
        throw ParseError("unsupported schema_version '" + version + "'");
    if (require_field(j, "kind").get<std::string>() != "decomposition")
        throw ParseError("artifact: expected kind 'decomposition'");
    if (require_field(j, "status").get<std::string>() != "feasible")
        throw ParseError("artifact: no decomposition stored for this status");

    LoadedDecomposition out;
    out.problem = decomposition_problem_from(require_field(j, "problem"));
    for (const Json& g : require_field(j, "grams"))
        out.decomposition.grams.push_back(matrix_from(g));
    for (const Json& channel : require_field(j, "factors")) {
        std::vector<CMatrix> per_node;
        for (const Json& h : channel) per_node.push_back(matrix_from(h));
        out.decomposition.factors.push_back(std::move(per_node));
    }
    out.decomposition.multiplicities =
        require_field(j, "multiplicities").get<std::vector<int>>();
    out.stored_residual = as_finite_double(require_field(j, "residual"), "residual");
    out.decomposition.residual = out.stored_residual;
    out.decomposition.iterations = require_field(j, "iterations").get<long>();
    return out;
}

Json colligation_artifact_json(const Colligation& col, const TransferReport& rep,
                               const Provenance& prov) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "colligation";
    j["io_dim"] = col.io_dim;
    j["A"] = matrix_json(col.A);
    j["B"] = matrix_json(col.B);
    j["C"] = matrix_json(col.C);
    j["D"] = matrix_json(col.D);
    Json sectors = Json::array();
    for (const Sector& s : col.sectors) {
        Json sj;
        sj["psi"] = testfn_json(s.psi);
        sj["multiplicity"] = s.multiplicity;
        sectors.push_back(std::move(sj));
    }
    j["sectors"] = std::move(sectors);
    Json nodes = Json::array();
    for (const Point& p : col.nodes) nodes.push_back(point_json(p));
    j["nodes"] = std::move(nodes);
    Json samples = Json::array();
    for (const CMatrix& s : col.samples) samples.push_back(matrix_json(s));
    j["samples"] = std::move(samples);
    Json report;
    report["unitarity_defect"] = rep.unitarity_defect;
    report["node_errors"] = rep.node_errors;
    report["max_node_error"] = rep.max_node_error;
    report["max_spectral_radius"] = rep.max_spectral_radius;
    report["max_resolvent_cond"] = rep.max_resolvent_cond;
    j["report"] = std::move(report);
    j["provenance"] = provenance_json(prov);
    return j;
}

Colligation colligation_from(const Json& j, double* stored_defect) {
    if (!j.is_object()) throw ParseError("artifact: expected an object");
    std::string version = require_field(j, "schema_version").get<std::string>();
    if (version != kSchemaVersion)
        throw ParseError("unsupported schema_version '" + version + "'");
    if (require_field(j, "kind").get<std::string>() != "colligation")
        throw ParseError("artifact: expected kind 'colligation'");

    Colligation col;
    col.io_dim = require_field(j, "io_dim").get<int>();
    col.A = matrix_from(require_field(j, "A"));
    col.B = matrix_from(require_field(j, "B"));
    col.C = matrix_from(require_field(j, "C"));
    col.D = matrix_from(require_field(j, "D"));
    for (const Json& sj : require_field(j, "sectors"))
        col.sectors.push_back(Sector{testfn_from(require_field(sj, "psi")),
                                     require_field(sj, "multiplicity").get<int>()});
    if (j.contains("nodes"))
        for (const Json& p : j["nodes"]) col.nodes.push_back(point_from(p));
    if (j.contains("samples"))
        for (const Json& s : j["samples"]) col.samples.push_back(matrix_from(s));
    const Eigen::Index x = col.state_dim();
    if (col.A.rows() != x || col.A.cols() != x || col.B.rows() != x ||
        col.B.cols() != col.io_dim || col.C.rows() != col.io_dim || col.C.cols() != x ||
        col.D.rows() != col.io_dim || col.D.cols() != col.io_dim)
        throw ParseError("colligation: block shapes disagree with the sector table");
    if (stored_defect) {
        const Json& rep = require_field(j, "report");
        *stored_defect = as_finite_double(require_field(rep, "unitarity_defect"),
                                          "report.unitarity_defect");
    }
    return col;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string timestamp_utc() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.good()) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}
