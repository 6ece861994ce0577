#include "ktp/io/clip.hpp"

#include <cmath>
#include <sstream>

#include "ktp/error.hpp"
#include "text_reader.hpp"

namespace ktp::io {

Clip parse_clip(const std::string& text) {
  detail::TextReader reader(text);
  const auto header = reader.tokens_of_next_line("clip header");
  if (header.empty() || header[0] != "ktp-clip") {
    throw ParseError("bad magic: expected 'ktp-clip'", reader.line_offset());
  }
  if (header.size() < 2 || header[1] != "v1") {
    throw ParseError("unsupported clip version '" + (header.size() > 1 ? header[1] : "") + "'",
                     reader.line_offset());
  }
  if (header.size() != 6) {
    throw ParseError("expected 'ktp-clip v1 <T> <N> <D> <unit>'", reader.line_offset());
  }
  const std::size_t frames = reader.parse_size(header[2], "frame count");
  const std::size_t joints = reader.parse_size(header[3], "joint count");
  const std::size_t dims = reader.parse_size(header[4], "coordinate count");
  if (frames == 0 || joints == 0) {
    throw ParseError("frame and joint counts must be positive", reader.line_offset());
  }
  if (dims != 2 && dims != 3) {
    throw ParseError("coordinate count D must be 2 or 3, got " + std::to_string(dims),
                     reader.line_offset());
  }
  Clip clip;
  clip.pose = PoseSequence(frames, joints, dims, header[5]);
  try {
    unit_to_meters(header[5]);
  } catch (const ConfigError& err) {
    throw ParseError(err.what(), reader.line_offset());
  }

  const std::size_t rows = frames * joints;
  std::size_t row = 0;
  while (row < rows) {
    const std::size_t before = reader.position();
    auto line = reader.next_line();
    if (!line) {
      throw ParseError("truncated payload: expected " + std::to_string(rows) + " rows of " +
                           std::to_string(dims) + " values, found " + std::to_string(row),
                       before);
    }
    auto tokens = detail::split_whitespace(*line);
    if (tokens.empty()) continue;
    if (tokens[0] == "#") {
      if (row != 0) throw ParseError("metadata after payload start", reader.line_offset());
      if (tokens.size() >= 3 && tokens[1] == "name") {
        clip.name = tokens[2];
      } else if (tokens.size() == 3 && tokens[1] == "fps") {
        clip.fps = reader.parse_double(tokens[2], "frame rate");
      }
      continue;
    }
    if (tokens.size() != dims) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(dims) +
                           " values, found " + std::to_string(tokens.size()),
                       reader.line_offset());
    }
    for (std::size_t c = 0; c < dims; ++c) {
      const double v = reader.parse_double(tokens[c], "coordinate");
      if (!std::isfinite(v)) throw ParseError("non-finite coordinate", reader.line_offset());
      clip.pose.values[row * dims + c] = v;
    }
    ++row;
  }
  if (reader.maybe_tokens_of_next_line()) {
    throw ParseError("trailing data after " + std::to_string(rows) + " payload rows",
                     reader.line_offset());
  }
  return clip;
}

std::string format_clip(const Clip& clip) {
  const PoseSequence& p = clip.pose;
  if (p.dims != 2 && p.dims != 3) throw ShapeError("clip coordinate count must be 2 or 3");
  if (p.values.size() != p.frames * p.joints * p.dims) {
    throw ShapeError("clip payload length does not match its shape");
  }
  std::ostringstream out;
  out << "ktp-clip v1 " << p.frames << ' ' << p.joints << ' ' << p.dims << ' ' << p.unit << '\n';
  if (!clip.name.empty()) out << "# name " << clip.name << '\n';
  if (clip.fps) out << "# fps " << detail::format_double(*clip.fps) << '\n';
  for (std::size_t r = 0; r < p.frames * p.joints; ++r) {
    for (std::size_t c = 0; c < p.dims; ++c) {
      const double v = p.values[r * p.dims + c];
      if (!std::isfinite(v)) throw NumericalError("cannot write non-finite coordinate");
      if (c) out << ' ';
      out << detail::format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

Clip load_clip_file(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  try {
    return parse_clip(text);
  } catch (const ParseError& err) {
    throw ParseError(path.string() + ": " + err.reason(), err.offset());
  }
}

void save_clip_file(const Clip& clip, const std::filesystem::path& path) {
  detail::write_text_file(path, format_clip(clip));
}

PoseSequence load_clip(const std::filesystem::path& path) { return load_clip_file(path).pose; }

void save_clip(const PoseSequence& seq, const std::filesystem::path& path) {
  save_clip_file(Clip{seq, {}, {}}, path);
}

}  // namespace ktp::io
