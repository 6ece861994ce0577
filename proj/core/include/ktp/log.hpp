#pragma once

#include <functional>
#include <string_view>

namespace ktp {

using WarningSink = std::function<void(std::string_view)>;

// Default sink writes "warning: <msg>" to stderr. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace ktp
