#ifndef PHASEFLOW_IO_HPP
#define PHASEFLOW_IO_HPP

#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "phaseflow/manifolds.hpp"

namespace phaseflow {

using json = nlohmann::json;

// RFC 4180 CSV writer: mandatory header, '.' decimal (C locale), CRLF-free
// rows, quoting only where required.
class CsvWriter {
    std::ofstream out_;
    std::size_t columns_ = 0;

    static std::string escape(const std::string& field) {
        if (field.find_first_of(",\"\n") == std::string::npos) return field;
        std::string quoted = "\"";
        for (char c : field) {
            if (c == '"') quoted += '"';
            quoted += c;
        }
        quoted += '"';
        return quoted;
    }

  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_(path), columns_(header.size()) {
        if (!out_) throw config_error("cannot open CSV for writing: " + path.string());
        write_row(header);
    }

    void write_row(const std::vector<std::string>& fields) {
        if (fields.size() != columns_) throw config_error("CSV row arity mismatch");
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << escape(fields[i]);
        }
        out_ << '\n';
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
    static std::string num(int v) { return std::to_string(v); }
    static std::string num(std::size_t v) { return std::to_string(v); }
};

inline json generator_to_json(const GeneratorFunction& f) {
    json j;
    j["n"] = f.n;
    j["basis_ids"] = json::array();
    j["coefficients"] = json::array();
    j["tpolys"] = json::array();
    for (const auto& t : f.terms) {
        j["basis_ids"].push_back(t.basis.id);
        j["coefficients"].push_back(t.coef);
        j["tpolys"].push_back(t.tpoly);
    }
    return j;
}

inline GeneratorFunction generator_from_json(const json& j) {
    GeneratorFunction f;
    f.n = j.at("n").get<int>();
    auto ids = j.at("basis_ids");
    auto coefs = j.at("coefficients");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        GeneratorFunction::Term t;
        t.coef = coefs[i].get<double>();
        t.basis = parse_basis_element(ids[i].get<std::string>(), f.n);
        if (j.contains("tpolys") && i < j["tpolys"].size())
            t.tpoly = j["tpolys"][i].get<std::vector<double>>();
        f.terms.push_back(std::move(t));
    }
    return f;
}

namespace iodetail {

inline void write_doubles(const std::filesystem::path& path, const double* data,
                          std::size_t count) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open binary sidecar: " + path.string());
    // little-endian IEEE 754 doubles, row-major (this build targets LE hosts)
    out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(double)));
}

inline std::vector<double> read_doubles(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw config_error("cannot open binary sidecar: " + path.string());
    std::streamsize bytes = in.tellg();
    in.seekg(0);
    std::vector<double> data(std::size_t(bytes) / sizeof(double));
    in.read(reinterpret_cast<char*>(data.data()), bytes);
    return data;
}

}  // namespace iodetail

// Serializes a manifold: a JSON document plus, for flow grids, binary
// sidecars with the node and frame arrays (little-endian f64, row-major,
// complex entries as re/im pairs).
inline void save_manifold(const IRManifold& m, const std::filesystem::path& json_path) {
    json j;
    j["schema"] = 1;
    j["n"] = m.n;
    j["R"] = m.R;
    j["grid_shape"] = m.shape;
    j["representation"] =
        m.rep == IRManifold::Rep::weight_graph ? "weight_graph" : "flow_grid";
    if (m.rep == IRManifold::Rep::weight_graph) j["phi"] = m.phi->id();
    j["generator_history"] = json::array();
    for (const auto& step : m.history) {
        json s = generator_to_json(step.f);
        s["t"] = step.t_final;
        s["dt"] = step.dt;
        j["generator_history"].push_back(s);
    }
    if (m.rep == IRManifold::Rep::flow_grid) {
        auto nodes_path = json_path;
        nodes_path.replace_extension(".nodes.bin");
        auto frames_path = json_path;
        frames_path.replace_extension(".frames.bin");
        iodetail::write_doubles(nodes_path, reinterpret_cast<const double*>(m.nodes.data()),
                                m.nodes.size() * 2);
        iodetail::write_doubles(frames_path, reinterpret_cast<const double*>(m.frames.data()),
                                m.frames.size() * 2);
        j["nodes_path"] = nodes_path.filename().string();
        j["frames_path"] = frames_path.filename().string();
    }
    std::ofstream out(json_path);
    if (!out) throw config_error("cannot write manifold JSON: " + json_path.string());
    out << j.dump(2) << "\n";
}

inline IRManifold load_manifold(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw config_error("cannot read manifold JSON: " + json_path.string());
    json j = json::parse(in);
    IRManifold m;
    m.n = j.at("n").get<int>();
    m.R = j.at("R").get<double>();
    m.shape = j.at("grid_shape").get<std::vector<int>>();
    std::string rep = j.at("representation").get<std::string>();
    for (const auto& s : j.value("generator_history", json::array())) {
        GeneratorStep step;
        step.f = generator_from_json(s);
        step.t_final = s.value("t", 0.0);
        step.dt = s.value("dt", 0.0);
        m.history.push_back(std::move(step));
    }
    if (rep == "weight_graph") {
        m.rep = IRManifold::Rep::weight_graph;
        m.phi = weights::parse(j.value("phi", "zero"), m.n);
        m.validate_shape();
        return m;
    }
    m.rep = IRManifold::Rep::flow_grid;
    auto dir = json_path.parent_path();
    auto nodes = iodetail::read_doubles(dir / j.at("nodes_path").get<std::string>());
    m.nodes.resize(nodes.size() / 2);
    std::memcpy(m.nodes.data(), nodes.data(), nodes.size() * sizeof(double));
    if (j.contains("frames_path")) {
        auto frames = iodetail::read_doubles(dir / j.at("frames_path").get<std::string>());
        m.frames.resize(frames.size() / 2);
        std::memcpy(m.frames.data(), frames.data(), frames.size() * sizeof(double));
    }
    m.validate_shape();
    if (m.nodes.size() != m.node_count() * std::size_t(m.dim()))
        throw config_error("manifold sidecar size does not match grid_shape");
    return m;
}

}  // namespace phaseflow

#endif
