#include "scenefit/formats.hpp"

#include <nlohmann/json.hpp>

#ifdef SCENEFIT_WITH_PNG
#include <png.h>
#endif

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace scenefit {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(path, e.what());
  }
  return doc;
}

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) fail(path, "write failed");
}

std::vector<char> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(path, "cannot open");
  const auto size = in.tellg();
  std::vector<char> bytes(static_cast<std::size_t>(size));
  in.seekg(0);
  in.read(bytes.data(), size);
  if (!in) fail(path, "read failed");
  return bytes;
}

}  // namespace

Keypoints2d load_keypoints(const std::filesystem::path& path) {
  const json doc = read_json(path);
  Keypoints2d kp;
  kp.names = doc.at("joint_names").get<std::vector<std::string>>();
  for (const json& row : doc.at("keypoints")) {
    if (!row.is_array() || row.size() != 3) fail(path, "keypoint rows must be [x, y, conf]");
    kp.pixels.emplace_back(row[0].get<double>(), row[1].get<double>());
    kp.confidence.push_back(row[2].get<double>());
  }
  kp.validate();
  return kp;
}

void save_keypoints(const Keypoints2d& keypoints, const std::filesystem::path& path) {
  keypoints.validate();
  json rows = json::array();
  for (int i = 0; i < keypoints.size(); ++i)
    rows.push_back({keypoints.pixels[i][0], keypoints.pixels[i][1], keypoints.confidence[i]});
  write_json(json{{"joint_names", keypoints.names}, {"keypoints", rows}}, path);
}

ContactProbMap load_contact_probs(const std::filesystem::path& path) {
  ContactProbMap map;
  if (path.extension() == ".json") {
    const json doc = read_json(path);
    map.prob = doc.at("contact_prob").get<std::vector<double>>();
  } else if (path.extension() == ".f32") {
    const auto bytes = read_binary(path);
    if (bytes.size() % 4 != 0) fail(path, "float32 payload has odd length");
    map.prob.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < map.prob.size(); ++i) {
      float v;
      std::memcpy(&v, bytes.data() + 4 * i, 4);
      map.prob[i] = v;
    }
  } else {
    fail(path, "unsupported contact probability extension");
  }
  return map;
}

void save_contact_probs(const ContactProbMap& probs, const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    write_json(json{{"contact_prob", probs.prob}}, path);
  } else if (path.extension() == ".f32") {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    for (double p : probs.prob) {
      const float v = static_cast<float>(p);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
    if (!out) fail(path, "write failed");
  } else {
    fail(path, "unsupported contact probability extension");
  }
}

namespace {

SubjectMask load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") fail(path, "not a P5/P2 PGM file");

  auto next_token = [&]() {
    std::string token;
    while (in >> token) {
      if (token[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return token;
    }
    fail(path, "truncated PGM header");
  };

  SubjectMask mask;
  mask.width = std::stoi(next_token());
  mask.height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (mask.width <= 0 || mask.height <= 0 || maxval <= 0 || maxval > 255)
    fail(path, "unsupported PGM geometry");
  const std::size_t count = static_cast<std::size_t>(mask.width) * mask.height;
  mask.data.resize(count);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(mask.data.data()), static_cast<std::streamsize>(count));
    if (!in) fail(path, "truncated PGM payload");
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      int v;
      if (!(in >> v)) fail(path, "truncated PGM payload");
      mask.data[i] = static_cast<std::uint8_t>(v);
    }
  }
  return mask;
}

#ifdef SCENEFIT_WITH_PNG

SubjectMask load_png(const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) fail(path, "cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(fp);
    fail(path, "png decode failed");
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  // Normalize everything to 8-bit gray.
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
  if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  SubjectMask mask;
  mask.width = static_cast<int>(png_get_image_width(png, info));
  mask.height = static_cast<int>(png_get_image_height(png, info));
  mask.data.resize(static_cast<std::size_t>(mask.width) * mask.height);
  std::vector<png_bytep> rows(mask.height);
  for (int y = 0; y < mask.height; ++y) rows[y] = mask.data.data() + static_cast<std::size_t>(y) * mask.width;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return mask;
}

#endif  // SCENEFIT_WITH_PNG

}  // namespace

SubjectMask load_mask(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return load_pgm(path);
#ifdef SCENEFIT_WITH_PNG
  if (ext == ".png") return load_png(path);
#endif
  fail(path, "unsupported mask extension '" + ext + "'");
}

void save_mask_pgm(const SubjectMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.data.data()),
            static_cast<std::streamsize>(mask.data.size()));
  if (!out) fail(path, "write failed");
}

#ifdef SCENEFIT_WITH_PNG

void save_mask_png(const SubjectMask& mask, const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    fail(path, "png encode failed");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, mask.width, mask.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < mask.height; ++y)
    png_write_row(png, const_cast<png_bytep>(mask.data.data() +
                                             static_cast<std::size_t>(y) * mask.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

#endif  // SCENEFIT_WITH_PNG

std::vector<int> load_labels(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    return read_json(path).at("labels").get<std::vector<int>>();
  }
  if (path.extension() == ".i32") {
    const auto bytes = read_binary(path);
    if (bytes.size() % 4 != 0) fail(path, "int32 payload has odd length");
    std::vector<int> labels(bytes.size() / 4);
    std::memcpy(labels.data(), bytes.data(), bytes.size());
    return labels;
  }
  fail(path, "unsupported label extension");
}

void save_labels(const std::vector<int>& labels, const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    write_json(json{{"labels", labels}}, path);
  } else if (path.extension() == ".i32") {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size() * 4));
    if (!out) fail(path, "write failed");
  } else {
    fail(path, "unsupported label extension");
  }
}

std::vector<BodyParams> load_params_sequence(const std::filesystem::path& path) {
  const json doc = read_json(path);
  std::vector<BodyParams> sequence;
  for (const json& frame : doc.at("frames")) {
    BodyParams params;
    const auto shape = frame.at("shape").get<std::vector<double>>();
    params.shape = Eigen::Map<const Eigen::VectorXd>(shape.data(), shape.size());
    for (const json& aa : frame.at("pose")) {
      if (!aa.is_array() || aa.size() != 3) fail(path, "pose entries must be 3-vectors");
      params.pose.emplace_back(aa[0].get<double>(), aa[1].get<double>(), aa[2].get<double>());
    }
    const auto t = frame.at("translation").get<std::vector<double>>();
    if (t.size() != 3) fail(path, "translation must be a 3-vector");
    params.translation = Vec3(t[0], t[1], t[2]);
    sequence.push_back(std::move(params));
  }
  return sequence;
}

void save_params_sequence(const std::vector<BodyParams>& sequence,
                          const std::filesystem::path& path) {
  json frames = json::array();
  for (const BodyParams& params : sequence) {
    json pose = json::array();
    for (const Vec3& aa : params.pose) pose.push_back({aa[0], aa[1], aa[2]});
    frames.push_back(
        {{"shape", std::vector<double>(params.shape.data(),
                                       params.shape.data() + params.shape.size())},
         {"pose", pose},
         {"translation", {params.translation[0], params.translation[1],
                          params.translation[2]}}});
  }
  write_json(json{{"frames", frames}}, path);
}

std::string frame_name(int index, const std::string& extension) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d", index);
  return std::string(buf) + extension;
}

}  // namespace scenefit
