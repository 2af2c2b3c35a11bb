#include "nafdrive/checkpoint.hpp"

#include <cstdio>

#include <json.hpp>

#include "nafdrive/error.hpp"
#include "nafdrive/io.hpp"

namespace nafdrive {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw IoError("checkpoint matrix has the wrong number of rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw IoError("checkpoint matrix has the wrong number of columns");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index n) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
        throw IoError("checkpoint vector has the wrong length");
    }
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

json layers_json(const std::vector<Eigen::MatrixXd>& weights, const std::vector<Eigen::VectorXd>& biases) {
    json w = json::array();
    json b = json::array();
    for (std::size_t l = 0; l < weights.size(); ++l) {
        w.push_back(matrix_json(weights[l]));
        b.push_back(vector_json(biases[l]));
    }
    return json{{"weights", w}, {"biases", b}};
}

void layers_from(const json& j, const std::vector<int>& dims, std::vector<Eigen::MatrixXd>& weights,
                 std::vector<Eigen::VectorXd>& biases) {
    const auto& w = j.at("weights");
    const auto& b = j.at("biases");
    if (w.size() + 1 != dims.size() || b.size() + 1 != dims.size()) {
        throw IoError("checkpoint layer count does not match layer_dims");
    }
    weights.clear();
    biases.clear();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        weights.push_back(matrix_from(w[l], dims[l + 1], dims[l]));
        biases.push_back(vector_from(b[l], dims[l + 1]));
    }
}

json network_json(const net::Network& net) {
    json j = layers_json(net.weights, net.biases);
    j["layer_dims"] = net.layer_dims;
    return j;
}

net::Network network_from(const json& j) {
    net::Network net;
    net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    layers_from(j, net.layer_dims, net.weights, net.biases);
    net.validate();
    return net;
}

json params_json(const nafq::NafParams& p) {
    json heads = json::object();
    for (nafq::Head h : nafq::kAllHeads) {
        heads[std::string(nafq::head_name(h))] = network_json(p[h]);
    }
    const auto& k = p.constants;
    return json{{"constants",
                 {{"a_cap", k.a_cap}, {"t_min", k.t_min}, {"t_max", k.t_max}, {"m_eps", k.m_eps},
                  {"a_clip", k.a_clip}, {"hidden_layers", k.hidden_layers}}},
                {"heads", heads}};
}

nafq::NafParams params_from(const json& j) {
    nafq::NafParams p;
    const auto& k = j.at("constants");
    p.constants.a_cap = k.at("a_cap").get<double>();
    p.constants.t_min = k.at("t_min").get<double>();
    p.constants.t_max = k.at("t_max").get<double>();
    p.constants.m_eps = k.at("m_eps").get<double>();
    p.constants.a_clip = k.at("a_clip").get<double>();
    p.constants.hidden_layers = k.at("hidden_layers").get<std::vector<int>>();
    for (nafq::Head h : nafq::kAllHeads) {
        p[h] = network_from(j.at("heads").at(std::string(nafq::head_name(h))));
    }
    p.validate();
    return p;
}

json opt_json(const net::AdamState& s) {
    return json{{"step", s.step},
                {"first_moment", layers_json(s.first_moment.weights, s.first_moment.biases)},
                {"second_moment", layers_json(s.second_moment.weights, s.second_moment.biases)}};
}

net::AdamState opt_from(const json& j, const net::Network& net) {
    net::AdamState s;
    s.step = j.at("step").get<std::int64_t>();
    layers_from(j.at("first_moment"), net.layer_dims, s.first_moment.weights, s.first_moment.biases);
    layers_from(j.at("second_moment"), net.layer_dims, s.second_moment.weights, s.second_moment.biases);
    return s;
}

}  // namespace

Checkpoint make_checkpoint(const learn::TrainerSnapshot& snapshot, const std::string& config_digest) {
    Checkpoint c;
    c.step = snapshot.step;
    c.params = snapshot.params;
    c.target_params = snapshot.target_params;
    c.opt_states = snapshot.opt_states;
    c.exploration_rng = snapshot.exploration_rng;
    c.replay_rng = snapshot.replay_rng;
    c.config_digest = config_digest;
    return c;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    json opt = json::object();
    for (nafq::Head h : nafq::kAllHeads) {
        opt[std::string(nafq::head_name(h))] = opt_json(ckpt.opt_states[static_cast<std::size_t>(h)]);
    }
    json root{{"format_version", ckpt.format_version},
              {"step", ckpt.step},
              {"config_digest", ckpt.config_digest},
              {"params", params_json(ckpt.params)},
              {"target_params", params_json(ckpt.target_params)},
              {"opt_states", opt},
              {"rng", {{"exploration", ckpt.exploration_rng}, {"replay", ckpt.replay_rng}}}};
    return root.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
    try {
        const json root = json::parse(text);
        Checkpoint c;
        c.format_version = root.at("format_version").get<int>();
        if (c.format_version != kCheckpointFormatVersion) {
            throw IoError("unsupported checkpoint format_version " + std::to_string(c.format_version));
        }
        c.step = root.at("step").get<std::int64_t>();
        c.config_digest = root.at("config_digest").get<std::string>();
        c.params = params_from(root.at("params"));
        c.target_params = params_from(root.at("target_params"));
        for (nafq::Head h : nafq::kAllHeads) {
            c.opt_states[static_cast<std::size_t>(h)] =
                opt_from(root.at("opt_states").at(std::string(nafq::head_name(h))), c.params[h]);
        }
        c.exploration_rng = root.at("rng").at("exploration").get<std::string>();
        c.replay_rng = root.at("rng").at("replay").get<std::string>();
        return c;
    } catch (const json::exception& e) {
        throw IoError(std::string("corrupt checkpoint: ") + e.what());
    } catch (const ContractError& e) {
        throw IoError(std::string("corrupt checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw IoError(std::string("corrupt checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    io::write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(io::read_file(path)); }

void check_digest(const Checkpoint& ckpt, const std::string& expected_digest, bool force) {
    if (ckpt.config_digest != expected_digest && !force) {
        throw ConfigError("checkpoint physics digest " + ckpt.config_digest + " does not match config digest " +
                          expected_digest + " (pass --force to override)");
    }
}

std::string checkpoint_filename(std::int64_t step) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "checkpoint_%08lld.json", static_cast<long long>(step));
    return buf;
}

}  // namespace nafdrive
