#include "ktp/log.hpp"

#include <iostream>
#include <utility>

namespace ktp {

namespace {
WarningSink& sink() {
  static WarningSink current = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return current;
}
}  // namespace

WarningSink set_warning_sink(WarningSink next) { return std::exchange(sink(), std::move(next)); }

void warn(std::string_view message) {
  if (sink()) sink()(message);
}

}  // namespace ktp
