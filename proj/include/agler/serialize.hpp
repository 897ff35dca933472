#ifndef AGLER_SERIALIZE_HPP
#define AGLER_SERIALIZE_HPP

#include <filesystem>
#include <optional>

#include "json.hpp"

#include "agler/kernels.hpp"
#include "agler/realize.hpp"

namespace agler {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1";

using Json = nlohmann::ordered_json;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Json complex_json(Complex z);
Complex complex_from(const Json& j);
Json matrix_json(const CMatrix& m);
CMatrix matrix_from(const Json& j);
Json point_json(const Point& p);
Point point_from(const Json& j);

Json measure_json(const QuantumMeasure& mu);
QuantumMeasure measure_from(const Json& j);
Json testfn_json(const TestFunction& f);
TestFunction testfn_from(const Json& j);
Json kernel_json(const FiniteKernel& k);
FiniteKernel kernel_from(const Json& j);

struct SolverOptions {
    std::optional<double> tol;
    std::optional<long> max_iters;
    std::optional<int> multiplicity;
    std::optional<long> sphere_samples;
    std::optional<int> y_samples;
    std::optional<unsigned long long> seed;
};

struct ProblemFile {
    InterpolationProblem problem;
    FamilySpec family;
    bool family_given = false;
    std::vector<FiniteKernel> kernel_family;
    SolverOptions options;
};

ProblemFile problem_from_json(const Json& j);
Json problem_to_json(const ProblemFile& p);

struct Provenance {
    std::string input_hash;
    unsigned long long seed = 0;
    std::string tool_version = kToolVersion;
    std::string timestamp;
    std::string status;
    double residual = 0.0;
    long iterations = 0;
};
Json provenance_json(const Provenance& p);

Json check_report_json(const CheckReport& r);

Json decomposition_artifact_json(const DecompositionProblem& problem,
                                 const DecompositionOutcome& outcome, const Provenance& prov);

struct LoadedDecomposition {
    DecompositionProblem problem;
    AglerDecomposition decomposition;
    double stored_residual = 0.0;
};
LoadedDecomposition decomposition_artifact_from(const Json& j);

Json colligation_artifact_json(const Colligation& col, const TransferReport& rep,
                               const Provenance& prov);
Colligation colligation_from(const Json& j, double* stored_defect = nullptr);

Json evidence_json(const SeparationEvidence& e);
SeparationEvidence evidence_from(const Json& j);

std::string fnv1a_hex(const std::string& bytes);
std::string timestamp_utc();
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

}

#endif
