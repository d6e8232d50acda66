#include "teleop/dmp_io.hpp"

#include "teleop/errors.hpp"

#include <json.hpp>

namespace teleop {

using nlohmann::json;

std::string model_to_json(const DmpModel& model) {
  json doc;
  doc["schema_version"] = kDmpSchemaVersion;
  doc["space"] = model.space == DmpSpace::JointSpace ? "joint" : "cartesian";
  doc["tau"] = model.tau;
  doc["dt"] = model.dt;
  doc["gains"] = {{"alpha_z", model.gains.alpha_z},
                  {"beta_z", model.gains.beta_z},
                  {"alpha_x", model.gains.alpha_x}};
  doc["dofs"] = json::array();
  for (const auto& dof : model.dofs) {
    doc["dofs"].push_back({{"weights", dof.weights},
                           {"centers", dof.centers},
                           {"widths", dof.widths},
                           {"y0", dof.y0},
                           {"g", dof.g}});
  }
  doc["object_id"] = model.object_id ? json(*model.object_id) : json(nullptr);
  return doc.dump(2);
}

DmpModel model_from_json(const std::string& text) {
  DmpModel model;
  try {
    const json doc = json::parse(text);
    const int version = doc.at("schema_version").get<int>();
    if (version != kDmpSchemaVersion) {
      throw DataError("unsupported DMP schema version " + std::to_string(version));
    }
    const auto space = doc.at("space").get<std::string>();
    if (space == "joint") {
      model.space = DmpSpace::JointSpace;
    } else if (space == "cartesian") {
      model.space = DmpSpace::CartesianSpace;
    } else {
      throw DataError("unknown DMP space " + space);
    }
    model.tau = doc.at("tau").get<double>();
    model.dt = doc.at("dt").get<double>();
    const json& gains = doc.at("gains");
    model.gains = {gains.at("alpha_z").get<double>(), gains.at("beta_z").get<double>(),
                   gains.at("alpha_x").get<double>()};
    for (const auto& d : doc.at("dofs")) {
      DmpDof dof;
      dof.weights = d.at("weights").get<std::vector<double>>();
      dof.centers = d.at("centers").get<std::vector<double>>();
      dof.widths = d.at("widths").get<std::vector<double>>();
      dof.y0 = d.at("y0").get<double>();
      dof.g = d.at("g").get<double>();
      model.dofs.push_back(std::move(dof));
    }
    const json& id = doc.at("object_id");
    if (!id.is_null()) model.object_id = id.get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("DMP document: ") + e.what());
  }
  validate_model(model);
  return model;
}

}  // namespace teleop
