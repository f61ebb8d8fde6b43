#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "apogee/physics.hpp"

namespace apogee {

/// Immutable, validated collection of motors. Array order defines
/// motor_index, which the feature vector depends on, so a trained model is
/// only valid against the database it was trained with.
class MotorDatabase {
public:
    explicit MotorDatabase(std::vector<MotorSpec> motors);

    const std::vector<MotorSpec>& motors() const { return motors_; }
    size_t size() const { return motors_.size(); }

    /// Case-sensitive exact lookup. Throws NotFoundError.
    const MotorSpec& get(std::string_view name) const;

    const MotorSpec& at(size_t index) const { return motors_.at(index); }

private:
    std::vector<MotorSpec> motors_;
    std::unordered_map<std::string, size_t> name_index_;
};

/// Parses the JSON motor database document. Throws ParseError on malformed
/// JSON and ValidationError when a motor violates an invariant.
MotorDatabase parse_motor_db(const std::string& json_text);

MotorDatabase load_motor_db(const std::string& path);

std::string motor_db_to_json(const MotorDatabase& db);

void save_motor_db(const MotorDatabase& db, const std::string& path);

} // namespace apogee
