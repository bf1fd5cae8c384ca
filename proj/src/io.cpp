#include "cvqp/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace cvqp {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void parse_error(const std::string& msg) { throw Error(ErrorCode::ParseError, msg); }

json scalar_to_json(double x) {
    if (x == kInf) return "inf";
    if (x == -kInf) return "-inf";
    return x;
}

double scalar_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    parse_error(where + ": expected a number, \"inf\" or \"-inf\"");
}

json vector_to_json(const VectorXd& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(scalar_to_json(v[i]));
    return arr;
}

VectorXd vector_from_json(const json& j, const std::string& name) {
    if (!j.is_array()) parse_error(name + ": expected an array");
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Index>(i)] = scalar_from_json(j[i], name + "[" + std::to_string(i) + "]");
    return v;
}

json matrix_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

// An empty array yields a 0 x cols matrix.
MatrixXd matrix_from_json(const json& j, const std::string& name, Index cols) {
    if (!j.is_array()) parse_error(name + ": expected an array of rows");
    MatrixXd m(static_cast<Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& row = j[i];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            std::ostringstream os;
            os << name << ": row " << i << " must have " << cols << " entries";
            parse_error(os.str());
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!row[c].is_number()) parse_error(name + ": entries must be numbers");
            m(static_cast<Index>(i), static_cast<Index>(c)) = row[c].get<double>();
        }
    }
    return m;
}

const json& field(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end()) parse_error(std::string("missing field \"") + key + "\"");
    return *it;
}

}  // namespace

json problem_to_json(const CvqpProblem& pr) {
    json doc;
    if (pr.P.is_diagonal())
        doc["P"] = json{{"diag", vector_to_json(pr.P.diagonal_entries())}};
    else
        doc["P"] = matrix_to_json(pr.P.dense_matrix());
    doc["q"] = vector_to_json(pr.q);
    doc["A"] = matrix_to_json(pr.A);
    doc["B"] = matrix_to_json(pr.B);
    doc["l"] = vector_to_json(pr.l);
    doc["u"] = vector_to_json(pr.u);
    doc["beta"] = pr.beta;
    doc["kappa"] = scalar_to_json(pr.kappa);
    return doc;
}

CvqpProblem problem_from_json(const json& doc) {
    if (!doc.is_object()) parse_error("problem document must be a JSON object");
    CvqpProblem pr;
    pr.q = vector_from_json(field(doc, "q"), "q");
    const Index n = pr.q.size();

    const json& P = field(doc, "P");
    if (P.is_object()) {
        pr.P = ObjectiveMatrix::diagonal(vector_from_json(field(P, "diag"), "P.diag"));
    } else {
        pr.P = ObjectiveMatrix::dense(matrix_from_json(P, "P", n));
    }
    pr.A = matrix_from_json(field(doc, "A"), "A", n);
    pr.B = matrix_from_json(field(doc, "B"), "B", n);
    pr.l = vector_from_json(field(doc, "l"), "l");
    pr.u = vector_from_json(field(doc, "u"), "u");
    pr.beta = scalar_from_json(field(doc, "beta"), "beta");
    pr.kappa = scalar_from_json(field(doc, "kappa"), "kappa");
    return pr;
}

CvqpProblem load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) parse_error("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        parse_error(path + ": " + e.what());
    }
    return problem_from_json(doc);
}

void save_problem(const CvqpProblem& problem, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << problem_to_json(problem).dump() << '\n';
}

json result_to_json(const SolverResult& r) {
    json doc;
    doc["status"] = to_string(r.status);
    doc["objective"] = r.objective;
    doc["iterations"] = r.iterations;
    doc["refactorizations"] = r.refactorizations;
    doc["x"] = vector_to_json(r.x);
    doc["r_norm"] = r.final_residuals.r_norm;
    doc["s_norm"] = r.final_residuals.s_norm;
    doc["eps_pri"] = r.final_residuals.eps_pri;
    doc["eps_dual"] = r.final_residuals.eps_dual;
    doc["rho"] = r.history.empty() ? 0.0 : r.history.back().rho;
    doc["timings"] = {{"factorization_s", r.timings.factorization},
                      {"projection_s", r.timings.projection},
                      {"total_s", r.timings.total}};
    json hist = json::array();
    for (const auto& h : r.history)
        hist.push_back({{"iteration", h.iteration},
                        {"r_norm", h.residuals.r_norm},
                        {"s_norm", h.residuals.s_norm},
                        {"eps_pri", h.residuals.eps_pri},
                        {"eps_dual", h.residuals.eps_dual},
                        {"rho", h.rho}});
    doc["history"] = std::move(hist);
    if (!r.message.empty()) doc["message"] = r.message;
    return doc;
}

}  // namespace cvqp
