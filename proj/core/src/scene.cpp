#include "epitask/scene.hpp"

#include <algorithm>
#include <set>

#include "epitask/errors.hpp"

namespace epitask {

namespace {

using ojson = nlohmann::ordered_json;

const char* const kSceneKeys[] = {
    "scene_id",          "episode_id",         "rooms",
    "furniture",         "objects",            "articulated_furniture",
    "furniture_in_rooms", "objects_on_furniture", "agent_spawns",
};

bool contains(const std::vector<std::string>& v, const std::string& id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

std::vector<std::string> string_array(const ojson& j, const std::string& key) {
  if (!j.is_array()) throw type_mismatch(key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) throw type_mismatch(key + " must contain only strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

const ojson& require(const ojson& doc, const std::string& key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw missing_field("scene document lacks \"" + key + "\"");
  return *it;
}

}  // namespace

std::string to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::room: return "room";
    case EntityKind::furniture: return "furniture";
    case EntityKind::object: return "object";
    case EntityKind::agent: return "agent";
    case EntityKind::item: return "item";
  }
  return "?";
}

bool Scene::has_room(const std::string& id) const { return contains(rooms, id); }
bool Scene::has_furniture(const std::string& id) const { return contains(furniture, id); }
bool Scene::has_object(const std::string& id) const { return contains(objects, id); }

bool Scene::has_agent(const std::string& id) const {
  return std::any_of(agent_spawns.begin(), agent_spawns.end(),
                     [&](const auto& kv) { return kv.first == id; });
}

bool Scene::is_articulated(const std::string& furniture_id) const {
  return contains(articulated_furniture, furniture_id);
}

std::vector<std::string> Scene::agent_ids() const {
  std::vector<std::string> out;
  out.reserve(agent_spawns.size());
  for (const auto& [id, spawn] : agent_spawns) out.push_back(id);
  return out;
}

std::optional<std::string> Scene::room_of_furniture(const std::string& furniture_id) const {
  for (const auto& [room, items] : furniture_in_rooms) {
    if (contains(items, furniture_id)) return room;
  }
  return std::nullopt;
}

std::optional<std::string> Scene::supporting_furniture(const std::string& object_id) const {
  for (const auto& [furn, items] : objects_on_furniture) {
    if (contains(items, object_id)) return furn;
  }
  return std::nullopt;
}

std::optional<std::string> Scene::spawn_room(const std::string& agent_id) const {
  for (const auto& [id, spawn] : agent_spawns) {
    if (id == agent_id) return spawn.room;
  }
  return std::nullopt;
}

Scene parse_scene(const std::string& text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw malformed_document(e.what());
  }
  if (!doc.is_object()) throw malformed_document("scene document must be a JSON object");

  Scene scene;
  const ojson& scene_id = require(doc, "scene_id");
  const ojson& episode_id = require(doc, "episode_id");
  if (!scene_id.is_string() || !episode_id.is_string()) {
    throw type_mismatch("scene_id and episode_id must be strings");
  }
  scene.scene_id = scene_id.get<std::string>();
  scene.episode_id = episode_id.get<std::string>();
  scene.rooms = string_array(require(doc, "rooms"), "rooms");
  scene.furniture = string_array(require(doc, "furniture"), "furniture");
  scene.objects = string_array(require(doc, "objects"), "objects");
  scene.articulated_furniture =
      string_array(require(doc, "articulated_furniture"), "articulated_furniture");

  const ojson& fir = require(doc, "furniture_in_rooms");
  if (!fir.is_object()) throw type_mismatch("furniture_in_rooms must be an object");
  for (const auto& [room, items] : fir.items()) {
    scene.furniture_in_rooms.emplace_back(room, string_array(items, "furniture_in_rooms." + room));
  }

  const ojson& oof = require(doc, "objects_on_furniture");
  if (!oof.is_object()) throw type_mismatch("objects_on_furniture must be an object");
  for (const auto& [furn, items] : oof.items()) {
    scene.objects_on_furniture.emplace_back(furn,
                                            string_array(items, "objects_on_furniture." + furn));
  }

  const ojson& spawns = require(doc, "agent_spawns");
  if (!spawns.is_object()) throw type_mismatch("agent_spawns must be an object");
  for (const auto& [agent, spec] : spawns.items()) {
    if (!spec.is_object()) throw type_mismatch("agent_spawns." + agent + " must be an object");
    AgentSpawn spawn;
    auto pos = spec.find("position");
    if (pos == spec.end() || !pos->is_array() || pos->size() != 3) {
      throw type_mismatch("agent_spawns." + agent + ".position must be a 3-vector");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(*pos)[i].is_number()) {
        throw type_mismatch("agent_spawns." + agent + ".position must be numeric");
      }
      spawn.position[i] = (*pos)[i].get<double>();
    }
    auto room = spec.find("room");
    if (room == spec.end()) throw missing_field("agent_spawns." + agent + " lacks \"room\"");
    if (!room->is_string()) throw type_mismatch("agent_spawns." + agent + ".room must be a string");
    spawn.room = room->get<std::string>();
    scene.agent_spawns.emplace_back(agent, spawn);
  }

  for (const auto& [key, value] : doc.items()) {
    if (std::find_if(std::begin(kSceneKeys), std::end(kSceneKeys),
                     [&, k = key](const char* known) { return k == known; }) ==
        std::end(kSceneKeys)) {
      scene.extras[key] = value;
    }
  }
  return scene;
}

std::string serialize_scene(const Scene& scene) {
  ojson doc;
  doc["scene_id"] = scene.scene_id;
  doc["episode_id"] = scene.episode_id;
  doc["rooms"] = scene.rooms;
  doc["furniture"] = scene.furniture;
  doc["objects"] = scene.objects;
  doc["articulated_furniture"] = scene.articulated_furniture;
  ojson fir = ojson::object();
  for (const auto& [room, items] : scene.furniture_in_rooms) fir[room] = items;
  doc["furniture_in_rooms"] = fir;
  ojson oof = ojson::object();
  for (const auto& [furn, items] : scene.objects_on_furniture) oof[furn] = items;
  doc["objects_on_furniture"] = oof;
  ojson spawns = ojson::object();
  for (const auto& [agent, spawn] : scene.agent_spawns) {
    spawns[agent] = {{"position", spawn.position}, {"room", spawn.room}};
  }
  doc["agent_spawns"] = spawns;
  for (const auto& [key, value] : scene.extras.items()) doc[key] = value;
  return doc.dump(2) + "\n";
}

SceneReport validate_scene(const Scene& scene) {
  SceneReport report;
  auto violation = [&](const std::string& invariant, std::vector<std::string> ids,
                       const std::string& message) {
    report.violations.push_back({invariant, std::move(ids), message});
  };

  for (const auto& [room, items] : scene.furniture_in_rooms) {
    if (!scene.has_room(room)) {
      violation("furniture_in_rooms_room_exists", {room},
                "furniture_in_rooms key \"" + room + "\" is not a declared room");
    }
    for (const auto& furn : items) {
      if (!scene.has_furniture(furn)) {
        violation("furniture_in_rooms_furniture_exists", {room, furn},
                  "furniture \"" + furn + "\" placed in \"" + room +
                      "\" is not in the furniture list");
      }
    }
  }

  for (const auto& furn : scene.articulated_furniture) {
    if (!scene.has_furniture(furn)) {
      violation("articulated_subset_of_furniture", {furn},
                "articulated furniture \"" + furn + "\" is not in the furniture list");
    }
  }

  std::set<std::string> placed;
  for (const auto& [furn, items] : scene.objects_on_furniture) {
    if (!scene.has_furniture(furn) || !scene.room_of_furniture(furn)) {
      // Legal but room-less support (the stock scenes contain this case);
      // objects riding on it have no room.
      report.warnings.push_back("objects_on_furniture key \"" + furn +
                                "\" has no room assignment; supported objects are room-less");
    }
    for (const auto& obj : items) {
      if (!scene.has_object(obj)) {
        violation("placed_object_exists", {furn, obj},
                  "object \"" + obj + "\" under \"" + furn + "\" is not in the objects list");
      }
      if (!placed.insert(obj).second) {
        violation("object_placed_once", {obj},
                  "object \"" + obj + "\" appears under more than one furniture");
      }
    }
  }

  for (const auto& [agent, spawn] : scene.agent_spawns) {
    if (!scene.has_room(spawn.room)) {
      violation("agent_spawn_room_exists", {agent, spawn.room},
                "agent \"" + agent + "\" spawns in unknown room \"" + spawn.room + "\"");
    }
  }

  return report;
}

std::optional<std::string> room_of(const Scene& scene, const EntityRef& entity) {
  switch (entity.kind) {
    case EntityKind::room:
      if (!scene.has_room(entity.id)) throw unknown_entity("room \"" + entity.id + "\"");
      return entity.id;
    case EntityKind::furniture:
      if (!scene.has_furniture(entity.id)) throw unknown_entity("furniture \"" + entity.id + "\"");
      return scene.room_of_furniture(entity.id);
    case EntityKind::object: {
      if (!scene.has_object(entity.id)) throw unknown_entity("object \"" + entity.id + "\"");
      auto support = scene.supporting_furniture(entity.id);
      if (!support) return std::nullopt;
      return scene.room_of_furniture(*support);
    }
    case EntityKind::agent:
      if (!scene.has_agent(entity.id)) throw unknown_entity("agent \"" + entity.id + "\"");
      return scene.spawn_room(entity.id);
    case EntityKind::item:
      throw unknown_entity("items have no room: \"" + entity.id + "\"");
  }
  return std::nullopt;
}

nlohmann::ordered_json scene_report_to_json(const SceneReport& report) {
  ojson out;
  out["violations"] = ojson::array();
  for (const auto& v : report.violations) {
    out["violations"].push_back({{"invariant", v.invariant}, {"ids", v.ids}, {"message", v.message}});
  }
  out["warnings"] = report.warnings;
  return out;
}

}  // namespace epitask
