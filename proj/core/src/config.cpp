#include "nafdrive/config.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "nafdrive/error.hpp"
#include "nafdrive/io.hpp"
#include "nafdrive/rng.hpp"

namespace nafdrive {

using nlohmann::json;

namespace {

// Reads the fields of one JSON object, tracking which keys were consumed so
// that leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError("config field '" + display() + "' must be an object");
        }
    }

    template <typename T>
    T get(const std::string& key) {
        const json& v = field(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) {
                    throw ConfigError("");
                }
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) {
                    throw ConfigError("");
                }
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) {
                    throw ConfigError("");
                }
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                        throw ConfigError("");
                    }
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) {
                    throw ConfigError("");
                }
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError("config field '" + child(key) + "' has the wrong type");
        }
    }

    ObjectReader object(const std::string& key) { return ObjectReader(field(key), child(key)); }

    const json& array(const std::string& key) {
        const json& v = field(key);
        if (!v.is_array()) {
            throw ConfigError("config field '" + child(key) + "' must be an array");
        }
        return v;
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& item : obj_.items()) {
            if (!used_.count(item.key())) {
                throw ConfigError("unknown config field '" + child(item.key()) + "'");
            }
        }
    }

private:
    const json& field(const std::string& key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            throw ConfigError("missing required config field '" + child(key) + "'");
        }
        used_.insert(key);
        return *it;
    }

    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> used_;
};

learn::TrainConfig read_train(ObjectReader r) {
    learn::TrainConfig t;
    t.learning_rate = r.get<double>("learning_rate");
    t.gamma = r.get<double>("gamma");
    t.batch_size = r.get<std::size_t>("batch_size");
    t.target_sync_every = r.get<std::int64_t>("target_sync_every");
    t.pretrain_steps = r.get<std::int64_t>("pretrain_steps");
    t.total_steps = r.get<std::int64_t>("total_steps");
    for (const auto& v : r.array("checkpoint_schedule")) {
        if (!v.is_number_integer()) {
            throw ConfigError("config field '" + r.child("checkpoint_schedule") + "' must hold integers");
        }
        t.checkpoint_schedule.push_back(v.get<std::int64_t>());
    }
    t.sigma_start = r.get<double>("sigma_start");
    t.sigma_end = r.get<double>("sigma_end");
    t.buffer_capacity = r.get<std::size_t>("buffer_capacity");
    t.loss_log_every = r.get<std::int64_t>("loss_log_every");
    t.max_sim_steps = r.get<std::int64_t>("max_sim_steps");
    r.finish();
    return t;
}

sim::RoadSpec read_road(ObjectReader r) {
    sim::RoadSpec road;
    road.lanes = r.get<int>("lanes");
    road.lane_width = r.get<double>("lane_width");
    road.length = r.get<double>("length");
    std::size_t i = 0;
    for (const auto& seg : r.array("curvature_profile")) {
        ObjectReader s(seg, r.child("curvature_profile") + "[" + std::to_string(i++) + "]");
        sim::CurvatureSegment c;
        c.start_station = s.get<double>("start_station");
        c.curvature = s.get<double>("curvature");
        s.finish();
        road.curvature_profile.push_back(c);
    }
    r.finish();
    return road;
}

sim::TrafficConfig read_traffic(ObjectReader r) {
    sim::TrafficConfig t;
    t.departure_interval_min = r.get<double>("departure_interval_min");
    t.departure_interval_max = r.get<double>("departure_interval_max");
    t.initial_speed_min = r.get<double>("initial_speed_min");
    t.initial_speed_max = r.get<double>("initial_speed_max");
    t.desired_speed_min = r.get<double>("desired_speed_min");
    t.desired_speed_max = r.get<double>("desired_speed_max");
    t.lane_change_trigger_station = r.get<double>("lane_change_trigger_station");
    t.change_prob_left = r.get<double>("change_prob_left");
    t.change_prob_right = r.get<double>("change_prob_right");
    t.entry_zone = r.get<double>("entry_zone");
    t.command_timeout = r.get<double>("command_timeout");
    r.finish();
    return t;
}

sim::RewardWeights read_reward(ObjectReader r) {
    sim::RewardWeights w;
    w.w_acce = r.get<double>("w_acce");
    w.w_rate = r.get<double>("w_rate");
    w.w_dev = r.get<double>("w_dev");
    w.d_avg = r.get<double>("d_avg");
    r.finish();
    return w;
}

longitudinal::IdmParams read_idm(ObjectReader r) {
    longitudinal::IdmParams p;
    p.s0 = r.get<double>("s0");
    p.T = r.get<double>("T");
    p.a_m = r.get<double>("a_m");
    p.b = r.get<double>("b");
    p.delta = r.get<double>("delta");
    p.b_max = r.get<double>("b_max");
    r.finish();
    return p;
}

sim::CompletionSpec read_completion(ObjectReader r) {
    sim::CompletionSpec c;
    c.max_abs_deviation = r.get<double>("max_abs_deviation");
    c.max_abs_theta = r.get<double>("max_abs_theta");
    c.max_abs_omega = r.get<double>("max_abs_omega");
    c.episode_cap_steps = r.get<int>("episode_cap_steps");
    r.finish();
    return c;
}

sim::WorldConfig read_world(ObjectReader r) {
    sim::WorldConfig w;
    w.dt = r.get<double>("dt");
    w.vehicle_length = r.get<double>("vehicle_length");
    w.sensing_range = r.get<double>("sensing_range");
    w.strict = r.get<bool>("strict");
    w.road = read_road(r.object("road"));
    w.traffic = read_traffic(r.object("traffic"));
    w.reward = read_reward(r.object("reward"));
    w.idm = read_idm(r.object("idm"));
    w.completion = read_completion(r.object("completion"));
    r.finish();
    return w;
}

nafq::NafConstants read_naf(ObjectReader r) {
    nafq::NafConstants k;
    k.a_cap = r.get<double>("a_cap");
    k.t_min = r.get<double>("t_min");
    k.t_max = r.get<double>("t_max");
    k.m_eps = r.get<double>("m_eps");
    k.a_clip = r.get<double>("a_clip");
    k.hidden_layers.clear();
    for (const auto& v : r.array("hidden_layers")) {
        if (!v.is_number_integer()) {
            throw ConfigError("config field '" + r.child("hidden_layers") + "' must hold integers");
        }
        k.hidden_layers.push_back(v.get<int>());
    }
    const auto& scale = r.array("input_scale");
    if (scale.size() != k.input_scale.size()) {
        throw ConfigError("config field '" + r.child("input_scale") + "' must hold " +
                          std::to_string(k.input_scale.size()) + " numbers");
    }
    for (std::size_t i = 0; i < scale.size(); ++i) {
        if (!scale[i].is_number()) {
            throw ConfigError("config field '" + r.child("input_scale") + "' must hold numbers");
        }
        k.input_scale[i] = scale[i].get<double>();
    }
    r.finish();
    return k;
}

json world_json(const sim::WorldConfig& w) {
    json curv = json::array();
    for (const auto& c : w.road.curvature_profile) {
        curv.push_back({{"start_station", c.start_station}, {"curvature", c.curvature}});
    }
    const auto& t = w.traffic;
    return json{
        {"dt", w.dt},
        {"vehicle_length", w.vehicle_length},
        {"sensing_range", w.sensing_range},
        {"strict", w.strict},
        {"road", {{"lanes", w.road.lanes}, {"lane_width", w.road.lane_width}, {"length", w.road.length},
                  {"curvature_profile", curv}}},
        {"traffic", {{"departure_interval_min", t.departure_interval_min},
                     {"departure_interval_max", t.departure_interval_max},
                     {"initial_speed_min", t.initial_speed_min},
                     {"initial_speed_max", t.initial_speed_max},
                     {"desired_speed_min", t.desired_speed_min},
                     {"desired_speed_max", t.desired_speed_max},
                     {"lane_change_trigger_station", t.lane_change_trigger_station},
                     {"change_prob_left", t.change_prob_left},
                     {"change_prob_right", t.change_prob_right},
                     {"entry_zone", t.entry_zone},
                     {"command_timeout", t.command_timeout}}},
        {"reward", {{"w_acce", w.reward.w_acce}, {"w_rate", w.reward.w_rate}, {"w_dev", w.reward.w_dev},
                    {"d_avg", w.reward.d_avg}}},
        {"idm", {{"s0", w.idm.s0}, {"T", w.idm.T}, {"a_m", w.idm.a_m}, {"b", w.idm.b}, {"delta", w.idm.delta},
                 {"b_max", w.idm.b_max}}},
        {"completion", {{"max_abs_deviation", w.completion.max_abs_deviation},
                        {"max_abs_theta", w.completion.max_abs_theta},
                        {"max_abs_omega", w.completion.max_abs_omega},
                        {"episode_cap_steps", w.completion.episode_cap_steps}}},
    };
}

json naf_json(const nafq::NafConstants& k) {
    return json{{"a_cap", k.a_cap}, {"t_min", k.t_min},   {"t_max", k.t_max},
                {"m_eps", k.m_eps}, {"a_clip", k.a_clip}, {"hidden_layers", k.hidden_layers},
                {"input_scale", k.input_scale}};
}

}  // namespace

void RunConfig::validate() const {
    train.validate();
    world.validate();
    naf.validate();
}

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ObjectReader r(root, "");
    RunConfig cfg;
    cfg.train = read_train(r.object("train"));
    cfg.train.seed = r.get<std::uint64_t>("seed");
    cfg.output_dir = r.get<std::string>("output_dir");
    cfg.world = read_world(r.object("world"));
    cfg.naf = read_naf(r.object("nafq"));
    r.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_run_config(text);
}

std::string serialize_run_config(const RunConfig& config) {
    const auto& t = config.train;
    json root{
        {"seed", t.seed},
        {"output_dir", config.output_dir},
        {"train", {{"learning_rate", t.learning_rate},
                   {"gamma", t.gamma},
                   {"batch_size", t.batch_size},
                   {"target_sync_every", t.target_sync_every},
                   {"pretrain_steps", t.pretrain_steps},
                   {"total_steps", t.total_steps},
                   {"checkpoint_schedule", t.checkpoint_schedule},
                   {"sigma_start", t.sigma_start},
                   {"sigma_end", t.sigma_end},
                   {"buffer_capacity", t.buffer_capacity},
                   {"loss_log_every", t.loss_log_every},
                   {"max_sim_steps", t.max_sim_steps}}},
        {"world", world_json(config.world)},
        {"nafq", naf_json(config.naf)},
    };
    return root.dump(2) + "\n";
}

std::string physics_digest(const RunConfig& config) {
    auto world = config.world;
    world.strict = false;  // a run-mode switch, not physics
    const json physics{{"world", world_json(world)}, {"nafq", naf_json(config.naf)}};
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(physics.dump())));
    return buf;
}

}  // namespace nafdrive
