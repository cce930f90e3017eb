#include <cstdio>
#include <fstream>
#include <sstream>

#include "flymethrough/project.hpp"

namespace flymethrough {

using nlohmann::json;

PoiReport build_poi_report(const Project& project) {
  PoiReport report;
  report.pois = json::array();
  std::size_t cast = 0, failed = 0, pending = 0;
  json failures = json::object();
  std::ostringstream obj;
  obj.precision(17);
  std::size_t vertex_base = 1;
  for (const PoiInstance& p : project.pois) {
    report.pois.push_back({{"id", p.id},
                           {"label", p.label},
                           {"description", p.description},
                           {"box", p.box ? to_json(*p.box) : json(nullptr)},
                           {"support_count", p.support_count},
                           {"status", to_string(p.status)},
                           {"failure", p.failure == FailureReason::None ? json(nullptr) : json(to_string(p.failure))}});
    switch (p.status) {
      case PoiStatus::Cast: ++cast; break;
      case PoiStatus::Failed: {
        ++failed;
        const std::string reason = to_string(p.failure);
        failures[reason] = failures.value(reason, 0) + 1;
        break;
      }
      case PoiStatus::Pending: ++pending; break;
    }
    if (p.status != PoiStatus::Cast || !p.box) continue;
    obj << "o " << p.id << "\n";
    for (int i = 0; i < 8; ++i) {
      const WorldPoint c = p.box->corner(i);
      obj << "v " << c.x() << " " << c.y() << " " << c.z() << "\n";
    }
    // Corner bits: 1 -> axis 0, 2 -> axis 1, 4 -> axis 2.
    static constexpr int kQuads[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                                         {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
    for (const auto& q : kQuads) {
      obj << "f " << vertex_base + q[0] << " " << vertex_base + q[1] << " " << vertex_base + q[2] << "\n";
      obj << "f " << vertex_base + q[0] << " " << vertex_base + q[2] << " " << vertex_base + q[3] << "\n";
    }
    vertex_base += 8;
  }
  const std::size_t total = project.pois.size();
  const double rate = total == 0 ? 0.0 : 100.0 * static_cast<double>(cast) / static_cast<double>(total);
  char text[32];
  std::snprintf(text, sizeof(text), "%.2f%%", rate);
  report.summary = {{"total", total},
                    {"cast", cast},
                    {"failed", failed},
                    {"pending", pending},
                    {"failures_by_reason", failures},
                    {"success_rate_percent", rate},
                    {"success_rate_text", text}};
  report.obj = obj.str();
  return report;
}

void write_poi_report(const PoiReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (out_dir / name).string());
    out << text;
  };
  write("pois.json", report.pois.dump(2) + "\n");
  write("summary.json", report.summary.dump(2) + "\n");
  write("pois.obj", report.obj);
}

}  // namespace flymethrough
