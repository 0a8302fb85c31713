#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace epitask {

enum class EntityKind { room, furniture, object, agent, item };

std::string to_string(EntityKind kind);

struct EntityRef {
  EntityKind kind;
  std::string id;

  bool operator==(const EntityRef&) const = default;
};

struct AgentSpawn {
  std::array<double, 3> position{0.0, 0.0, 0.0};
  std::string room;

  bool operator==(const AgentSpawn&) const = default;
};

// Symbolic scene graph. Field order mirrors the scene JSON layout; the
// per-key vectors keep document order so serialization round-trips.
struct Scene {
  std::string scene_id;
  std::string episode_id;
  std::vector<std::string> rooms;
  std::vector<std::string> furniture;
  std::vector<std::string> objects;
  std::vector<std::string> articulated_furniture;
  std::vector<std::pair<std::string, std::vector<std::string>>> furniture_in_rooms;
  std::vector<std::pair<std::string, std::vector<std::string>>> objects_on_furniture;
  std::vector<std::pair<std::string, AgentSpawn>> agent_spawns;
  nlohmann::ordered_json extras = nlohmann::ordered_json::object();

  bool has_room(const std::string& id) const;
  bool has_furniture(const std::string& id) const;
  bool has_object(const std::string& id) const;
  bool has_agent(const std::string& id) const;
  bool is_articulated(const std::string& furniture_id) const;

  std::vector<std::string> agent_ids() const;

  // Room that directly contains the furniture, none when the furniture is
  // absent from furniture_in_rooms.
  std::optional<std::string> room_of_furniture(const std::string& furniture_id) const;
  // Furniture currently supporting the object per objects_on_furniture.
  std::optional<std::string> supporting_furniture(const std::string& object_id) const;
  std::optional<std::string> spawn_room(const std::string& agent_id) const;
};

struct SceneViolation {
  std::string invariant;
  std::vector<std::string> ids;
  std::string message;
};

struct SceneReport {
  std::vector<SceneViolation> violations;
  // Flagged-but-legal oddities, e.g. placements on furniture that is absent
  // from furniture_in_rooms (such objects are room-less, not invalid).
  std::vector<std::string> warnings;

  bool ok() const { return violations.empty(); }
};

Scene parse_scene(const std::string& text);
std::string serialize_scene(const Scene& scene);

SceneReport validate_scene(const Scene& scene);

// Resolves the room an entity is in: furniture via furniture_in_rooms,
// objects via their supporting furniture, agents via spawn room, rooms map
// to themselves. none for placeless entities. Throws unknown_entity when the
// id does not resolve in the scene at all.
std::optional<std::string> room_of(const Scene& scene, const EntityRef& entity);

nlohmann::ordered_json scene_report_to_json(const SceneReport& report);

}  // namespace epitask
