#include "apogee/motordb.hpp"

#include <json.hpp>

#include "apogee/csvio.hpp"
#include "apogee/errors.hpp"

namespace apogee {

using nlohmann::json;

MotorDatabase::MotorDatabase(std::vector<MotorSpec> motors) : motors_(std::move(motors)) {
    for (size_t i = 0; i < motors_.size(); ++i) {
        motors_[i].motor_index = static_cast<int>(i);
        motors_[i].validate();
        const auto [it, inserted] = name_index_.emplace(motors_[i].name, i);
        if (!inserted)
            throw ValidationError("duplicate motor name: '" + motors_[i].name + "'");
    }
}

const MotorSpec& MotorDatabase::get(std::string_view name) const {
    const auto it = name_index_.find(std::string(name));
    if (it == name_index_.end())
        throw NotFoundError("unknown motor: '" + std::string(name) + "'");
    return motors_[it->second];
}

MotorDatabase parse_motor_db(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("motor db: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("motors") || !doc["motors"].is_array())
        throw ParseError("motor db: expected top-level object with a 'motors' array");

    std::vector<MotorSpec> motors;
    for (const auto& m : doc["motors"]) {
        MotorSpec spec;
        try {
            spec.name = m.at("name").get<std::string>();
            spec.total_impulse = m.at("total_impulse_ns").get<double>();
            spec.burn_time = m.at("burn_time_s").get<double>();
            spec.propellant_mass = m.at("propellant_mass_kg").get<double>();
            spec.ramp_fraction = m.at("ramp_fraction").get<double>();
            spec.decay_fraction = m.at("decay_fraction").get<double>();
        } catch (const json::exception& e) {
            throw ParseError(std::string("motor db: bad motor record: ") + e.what());
        }
        motors.push_back(std::move(spec));
    }
    return MotorDatabase(std::move(motors));
}

MotorDatabase load_motor_db(const std::string& path) {
    return parse_motor_db(read_file(path));
}

std::string motor_db_to_json(const MotorDatabase& db) {
    json arr = json::array();
    for (const auto& m : db.motors()) {
        arr.push_back({{"name", m.name},
                       {"total_impulse_ns", m.total_impulse},
                       {"burn_time_s", m.burn_time},
                       {"propellant_mass_kg", m.propellant_mass},
                       {"ramp_fraction", m.ramp_fraction},
                       {"decay_fraction", m.decay_fraction}});
    }
    return json{{"motors", arr}}.dump(2) + "\n";
}

void save_motor_db(const MotorDatabase& db, const std::string& path) {
    write_file(path, motor_db_to_json(db));
}

} // namespace apogee
