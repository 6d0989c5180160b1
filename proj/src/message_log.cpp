#include "dmpcq/message_log.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dmpcq {

void MessageLog::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "phase,kind,step,round,sender,receiver,num_scalars\n";
  for (const auto& r : records_) {
    out << r.phase << ',' << r.kind << ',' << r.step << ',' << r.round << ','
        << r.sender << ',' << r.receiver << ',' << r.num_scalars << '\n';
  }
}

MessageLog MessageLog::read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  MessageLog log;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    MessageRecord r;
    std::string field;
    std::getline(ss, r.phase, ',');
    std::getline(ss, r.kind, ',');
    std::getline(ss, field, ',');
    r.step = std::stoll(field);
    std::getline(ss, field, ',');
    r.round = std::stoi(field);
    std::getline(ss, field, ',');
    r.sender = std::stoi(field);
    std::getline(ss, field, ',');
    r.receiver = std::stoi(field);
    std::getline(ss, field, ',');
    r.num_scalars = std::stoi(field);
    log.record(std::move(r));
  }
  return log;
}

}  // namespace dmpcq
