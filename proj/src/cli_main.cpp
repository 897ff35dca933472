#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "agler/serialize.hpp"

namespace {

using namespace agler;

constexpr int kExitFeasible = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitUndecided = 3;
constexpr int kExitParse = 64;
constexpr int kExitInconsistent = 65;
constexpr int kExitMissing = 66;

struct CliError {
    int code;
    std::string message;
};

std::string read_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw CliError{kExitMissing, "no such file: " + path};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError{kExitMissing, "cannot open: " + path};
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Json parse_json(const std::string& bytes, const std::string& what) {
    try {
        return Json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw CliError{kExitParse, what + ": " + e.what()};
    }
}

void emit(const Json& j, const std::string& out_path) {
    std::string text = j.dump(2);
    text.push_back('\n');
    if (out_path.empty())
        std::cout << text;
    else
        atomic_write_file(out_path, text);
}

int verdict_exit(Verdict v) {
    switch (v) {
        case Verdict::feasible: return kExitFeasible;
        case Verdict::infeasible: return kExitInfeasible;
        case Verdict::undecided: return kExitUndecided;
    }
    return kExitUndecided;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::feasible: return "feasible";
        case Verdict::infeasible: return "infeasible";
        case Verdict::undecided: return "undecided";
    }
    return "undecided";
}

struct CheckFlags {
    std::string input, out;
    double tol = 1e-9;
    long samples = 1200;
    int y_samples = 8;
    unsigned long long seed = 1;
    bool seed_set = false, samples_set = false, y_set = false;
};

int cmd_check(const CheckFlags& fl) {
    std::string bytes = read_file(fl.input);
    ProblemFile file = problem_from_json(parse_json(bytes, fl.input));

    unsigned long long seed = fl.seed_set ? fl.seed : file.options.seed.value_or(fl.seed);
    long samples =
        fl.samples_set ? fl.samples : file.options.sphere_samples.value_or(fl.samples);
    int y_samples = fl.y_set ? fl.y_samples : file.options.y_samples.value_or(fl.y_samples);

    CheckReport rep;
    switch (file.problem.tag) {
        case InterpolationProblem::ClassTag::classical_disk: {
            CMatrix pick = dbr_pick_matrix(file.problem);
            PsdReport psd = psd_check(pick, fl.tol);
            rep.verdict = psd.is_psd ? Verdict::feasible : Verdict::infeasible;
            rep.min_eig_seen = psd.min_eigenvalue;
            rep.samples_used = 1;
            if (!psd.is_psd) {
                CheckWitness w;
                w.pick = std::move(pick);
                w.report = std::move(psd);
                rep.witness = std::move(w);
            }
            break;
        }
        case InterpolationProblem::ClassTag::constrained_hardy:
            rep = constrained_np_check(file.problem, samples, y_samples, seed, fl.tol);
            break;
        case InterpolationProblem::ClassTag::polydisk:
        case InterpolationProblem::ClassTag::custom:
            rep = generic_dual_check(file.problem, file.kernel_family, y_samples, fl.tol);
            break;
    }

    Provenance prov;
    prov.input_hash = fnv1a_hex(bytes);
    prov.seed = seed;
    prov.timestamp = timestamp_utc();
    prov.status = verdict_name(rep.verdict);
    prov.residual = rep.min_eig_seen;
    prov.iterations = rep.samples_used;

    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "check_report";
    Json body = check_report_json(rep);
    j.update(body);
    j["provenance"] = provenance_json(prov);
    emit(j, fl.out);
    return verdict_exit(rep.verdict);
}

struct DecomposeFlags {
    std::string input, out, family;
    double tol = 0;
    long max_iters = 0;
    int multiplicity = -1;
    unsigned long long seed = 1;
    bool tol_set = false, iters_set = false, mult_set = false, seed_set = false;
};

int cmd_decompose(const DecomposeFlags& fl) {
    std::string bytes = read_file(fl.input);
    ProblemFile file = problem_from_json(parse_json(bytes, fl.input));

    DecompositionProblem dp;
    dp.nodes = file.problem.nodes;
    dp.samples = file.problem.values;

    unsigned long long seed = fl.seed_set ? fl.seed : file.options.seed.value_or(fl.seed);
    FamilySpec spec = file.family;
    if (!file.family_given) {
        spec.domain_dim = file.problem.domain_dim;
        spec.block_dim = 1;
        spec.seed = seed;
        switch (file.problem.tag) {
            case InterpolationProblem::ClassTag::polydisk:
                spec.kind = FamilySpec::Kind::polydisk;
                break;
            case InterpolationProblem::ClassTag::constrained_hardy:
                spec.kind = FamilySpec::Kind::constrained;
                spec.include_antipodal = true;
                break;
            default:
                spec.kind = FamilySpec::Kind::disk;
                break;
        }
    }
    if (!fl.family.empty()) {
        if (fl.family == "disk")
            spec.kind = FamilySpec::Kind::disk;
        else if (fl.family == "polydisk")
            spec.kind = FamilySpec::Kind::polydisk;
        else if (fl.family == "constrained") {
            spec.kind = FamilySpec::Kind::constrained;
            spec.include_antipodal = true;
        } else
            throw CliError{kExitParse, "unknown --family '" + fl.family + "'"};
        spec.domain_dim = file.problem.domain_dim;
    }
    dp.family = build_family(spec);

    if (file.options.tol) dp.tol = *file.options.tol;
    if (file.options.max_iters) dp.max_iters = *file.options.max_iters;
    if (file.options.multiplicity) dp.multiplicity = *file.options.multiplicity;
    if (fl.tol_set) dp.tol = fl.tol;
    if (fl.iters_set) dp.max_iters = fl.max_iters;
    if (fl.mult_set) dp.multiplicity = fl.multiplicity;

    DecompositionOutcome outcome = solve_decomposition(dp);

    Provenance prov;
    prov.input_hash = fnv1a_hex(bytes);
    prov.seed = seed;
    prov.timestamp = timestamp_utc();
    prov.residual = outcome.residual;
    prov.iterations = outcome.iterations;
    switch (outcome.status) {
        case SolveStatus::feasible: prov.status = "feasible"; break;
        case SolveStatus::infeasible: prov.status = "infeasible"; break;
        case SolveStatus::undecided: prov.status = "undecided"; break;
    }

    emit(decomposition_artifact_json(dp, outcome, prov), fl.out);
    switch (outcome.status) {
        case SolveStatus::feasible: return kExitFeasible;
        case SolveStatus::infeasible: return kExitInfeasible;
        case SolveStatus::undecided: return kExitUndecided;
    }
    return kExitUndecided;
}

struct RealizeFlags {
    std::string input, out;
    double round_trip_tol = 1e-6;
};

int cmd_realize(const RealizeFlags& fl) {
    std::string bytes = read_file(fl.input);
    Json j = parse_json(bytes, fl.input);
    LoadedDecomposition loaded = decomposition_artifact_from(j);

    Colligation col;
    TransferReport rep;
    try {
        double recomputed = verify_decomposition(loaded.decomposition, loaded.problem);
        if (std::abs(recomputed - loaded.stored_residual) > 1e-12)
            throw CliError{kExitInconsistent,
                           "artifact residual does not reproduce on reload (stored " +
                               std::to_string(loaded.stored_residual) + ", recomputed " +
                               std::to_string(recomputed) + ")"};
        col = lurking_isometry(loaded.decomposition, loaded.problem);
        rep = verify_colligation(col);
    } catch (const NotPositiveKernel& e) {
        throw CliError{kExitInconsistent, std::string("artifact rejected: ") + e.what()};
    } catch (const InconsistentDecomposition& e) {
        throw CliError{kExitInconsistent, std::string("artifact rejected: ") + e.what()};
    } catch (const InvalidInput& e) {
        throw CliError{kExitInconsistent, std::string("artifact rejected: ") + e.what()};
    }

    Provenance prov;
    prov.input_hash = fnv1a_hex(bytes);
    prov.seed = 0;
    prov.timestamp = timestamp_utc();
    prov.residual = rep.max_node_error;
    prov.iterations = 0;
    bool round_trip_ok = rep.max_node_error <= fl.round_trip_tol;
    prov.status = round_trip_ok ? "feasible" : "undecided";

    emit(colligation_artifact_json(col, rep, prov), fl.out);
    if (!round_trip_ok) {
        std::cerr << "round-trip node error " << rep.max_node_error << " exceeds "
                  << fl.round_trip_tol << "\n";
        return kExitUndecided;
    }
    return kExitFeasible;
}

struct EvalFlags {
    std::string input, out;
    std::vector<std::string> points;
};

double parse_real_literal(const std::string& s, const std::string& what) {
    if (s.empty()) throw CliError{kExitParse, what + ": empty number"};
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v))
        throw CliError{kExitParse, what + ": malformed number '" + s + "'"};
    return v;
}

Complex parse_complex_literal(std::string s, const std::string& what) {
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
            s.end());
    if (s.empty()) throw CliError{kExitParse, what + ": empty coordinate"};
    if (s == "i" || s == "+i") return {0, 1};
    if (s == "-i") return {0, -1};
    if (s.back() != 'i') return {parse_real_literal(s, what), 0};
    s.pop_back();
    size_t split = std::string::npos;
    for (size_t p = s.size(); p-- > 1;)
        if ((s[p] == '+' || s[p] == '-') && s[p - 1] != 'e' && s[p - 1] != 'E') {
            split = p;
            break;
        }
    if (split == std::string::npos) return {0, parse_real_literal(s, what)};
    std::string im = s.substr(split);
    double imag = im == "+" ? 1.0 : im == "-" ? -1.0 : parse_real_literal(im, what);
    return {parse_real_literal(s.substr(0, split), what), imag};
}

Point parse_point_literal(const std::string& s, const std::string& what) {
    std::vector<Complex> coords;
    size_t start = 0;
    while (true) {
        size_t comma = s.find(',', start);
        coords.push_back(parse_complex_literal(
            s.substr(start, comma == std::string::npos ? comma : comma - start), what));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    Point z(static_cast<Eigen::Index>(coords.size()));
    for (size_t c = 0; c < coords.size(); ++c) z(static_cast<Eigen::Index>(c)) = coords[c];
    return z;
}

int cmd_eval(const EvalFlags& fl) {
    std::string bytes = read_file(fl.input);
    double stored_defect = 0;
    Colligation col;
    try {
        col = colligation_from(parse_json(bytes, fl.input), &stored_defect);
    } catch (const ParseError& e) {
        throw CliError{kExitParse, fl.input + ": " + e.what()};
    }
    double defect = verify_colligation(Colligation{col}).unitarity_defect;
    if (std::abs(defect - stored_defect) > 1e-12)
        throw CliError{kExitInconsistent, "artifact unitarity defect does not reproduce"};

    Json values = Json::array();
    Json points = Json::array();
    Json warnings = Json::array();
    for (size_t k = 0; k < fl.points.size(); ++k) {
        Point z = parse_point_literal(fl.points[k], "point " + std::to_string(k));
        CMatrix rho = rho_eval(col.sectors, z);
        if (rho.rows()) {
            CMatrix f = CMatrix::Identity(rho.rows(), rho.rows()) - rho * col.A;
            Eigen::JacobiSVD<CMatrix> svd(f);
            double smin = svd.singularValues()(svd.singularValues().size() - 1);
            double cond = smin > 0 ? svd.singularValues()(0) / smin
                                   : std::numeric_limits<double>::infinity();
            if (cond > 1e8) {
                std::ostringstream w;
                w << "point " << k << ": resolvent condition " << cond;
                warnings.push_back(w.str());
                std::cerr << "warning: " << w.str() << "\n";
            }
        }
        points.push_back(point_json(z));
        values.push_back(matrix_json(transfer_eval(col, z)));
    }

    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "evaluation";
    j["points"] = std::move(points);
    j["values"] = std::move(values);
    if (!warnings.empty()) j["warnings"] = std::move(warnings);
    emit(j, fl.out);
    return kExitFeasible;
}

struct TestfnFlags {
    std::string out;
    int block_dim = 1;
    int count = 4;
    unsigned long long seed = 1;
    bool include_antipodal = false;
};

int cmd_testfn(const TestfnFlags& fl) {
    if (fl.block_dim < 1) throw CliError{kExitParse, "--block-dim must be at least 1"};
    if (fl.count < 1) throw CliError{kExitParse, "--count must be at least 1"};

    FamilySpec spec;
    spec.kind = FamilySpec::Kind::constrained;
    spec.domain_dim = 1;
    spec.block_dim = fl.block_dim;
    spec.count = fl.count;
    spec.seed = fl.seed;
    spec.include_antipodal = fl.include_antipodal;
    std::vector<TestFunction> family = build_family(spec);

    Json measures = Json::array();
    for (const TestFunction& f : family) measures.push_back(measure_json(f.measure()));

    std::ostringstream key;
    key << "testfn block_dim=" << fl.block_dim << " count=" << fl.count << " seed=" << fl.seed
        << " antipodal=" << fl.include_antipodal;
    Provenance prov;
    prov.input_hash = fnv1a_hex(key.str());
    prov.seed = fl.seed;
    prov.timestamp = timestamp_utc();
    prov.status = "feasible";
    prov.iterations = static_cast<long>(family.size());

    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "measures";
    j["block_dim"] = fl.block_dim;
    j["measures"] = std::move(measures);
    j["provenance"] = provenance_json(prov);
    emit(j, fl.out);
    if (static_cast<int>(family.size()) < fl.count) {
        std::cerr << "sampled only " << family.size() << " of " << fl.count << " measures\n";
        return kExitUndecided;
    }
    return kExitFeasible;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("AGLER_THREADS"))
        Eigen::setNbThreads(std::max(1, std::atoi(threads)));

    CLI::App app{"test-function interpolation, Agler decomposition, and realization toolkit"};
    app.require_subcommand(1);

    CheckFlags check;
    CLI::App* c = app.add_subcommand("check", "interpolation feasibility check");
    c->add_option("problem", check.input, "problem JSON file")->required();
    c->add_option("--tol", check.tol, "PSD tolerance");
    c->add_option("--samples", check.samples, "sphere sample count")
        ->each([&](const std::string&) { check.samples_set = true; });
    c->add_option("--y-samples", check.y_samples, "right-direction sample count")
        ->each([&](const std::string&) { check.y_set = true; });
    c->add_option("--seed", check.seed, "sampling seed")
        ->each([&](const std::string&) { check.seed_set = true; });
    c->add_option("--out", check.out, "report output path (default stdout)");

    DecomposeFlags dec;
    CLI::App* d = app.add_subcommand("decompose", "solve for an Agler decomposition");
    d->add_option("problem", dec.input, "problem JSON file")->required();
    d->add_option("--tol", dec.tol, "feasibility tolerance")
        ->each([&](const std::string&) { dec.tol_set = true; });
    d->add_option("--max-iters", dec.max_iters, "iteration cap")
        ->each([&](const std::string&) { dec.iters_set = true; });
    d->add_option("--multiplicity", dec.multiplicity, "copies per test function")
        ->each([&](const std::string&) { dec.mult_set = true; });
    d->add_option("--seed", dec.seed, "family sampling seed")
        ->each([&](const std::string&) { dec.seed_set = true; });
    d->add_option("--family", dec.family, "family kind: disk | polydisk | constrained");
    d->add_option("--out", dec.out, "artifact output path (default stdout)");

    RealizeFlags rea;
    CLI::App* r = app.add_subcommand("realize", "build a unitary colligation");
    r->add_option("artifact", rea.input, "decomposition artifact JSON")->required();
    r->add_option("--tol", rea.round_trip_tol, "round-trip node error threshold");
    r->add_option("--out", rea.out, "artifact output path (default stdout)");

    EvalFlags ev;
    CLI::App* e = app.add_subcommand("eval", "evaluate a realized transfer function");
    e->add_option("artifact", ev.input, "colligation artifact JSON")->required();
    e->add_option("points", ev.points,
                  "points as comma-separated complex coordinates, e.g. 0.3 or 0.2,0.3-0.1i")
        ->required();
    e->add_option("--out", ev.out, "output path (default stdout)");

    TestfnFlags tf;
    CLI::App* t = app.add_subcommand("testfn", "sample constrained test-function measures");
    t->add_option("--block-dim", tf.block_dim, "measure block dimension");
    t->add_option("--count", tf.count, "number of measures");
    t->add_option("--seed", tf.seed, "sampling seed");
    t->add_flag("--include-antipodal", tf.include_antipodal, "lead with the antipodal measure");
    t->add_option("--out", tf.out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : kExitParse;
    }

    try {
        if (c->parsed()) return cmd_check(check);
        if (d->parsed()) return cmd_decompose(dec);
        if (r->parsed()) return cmd_realize(rea);
        if (e->parsed()) return cmd_eval(ev);
        if (t->parsed()) return cmd_testfn(tf);
    } catch (const CliError& err) {
        std::cerr << "error: " << err.message << "\n";
        return err.code;
    } catch (const ParseError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitParse;
    } catch (const InconsistentDecomposition& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitInconsistent;
    } catch (const InvalidInput& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitParse;
    } catch (const NumericalFailure& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitInconsistent;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitInconsistent;
    }
    return kExitParse;
}
