#include "liftcam/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace liftcam::io {

namespace {

void append_f32le(std::string& out, const Tensor& t) {
    const std::size_t start = out.size();
    out.resize(start + 4 * t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(t[i]);
        for (int b = 0; b < 4; ++b) out[start + 4 * i + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
}

Tensor read_f32le(const std::string& bytes, std::size_t offset, Shape shape) {
    std::vector<float> data(shape_numel(shape));
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 4 * i + static_cast<std::size_t>(b)]))
                    << (8 * b);
        }
        data[i] = std::bit_cast<float>(bits);
    }
    return Tensor(std::move(shape), std::move(data));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

}  // namespace

const Tensor* Container::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

const Tensor& Container::tensor(const std::string& name) const {
    if (const Tensor* t = find(name)) return *t;
    throw FormatError("container has no tensor named '" + name + "'");
}

std::string encode_container(const Container& container) {
    nlohmann::json header = container.meta;
    header["version"] = kFormatVersion;
    auto& table = header["tensors"] = nlohmann::json::array();
    std::string payload;
    for (const auto& [name, t] : container.tensors) {
        table.push_back({{"name", name},
                         {"shape", t.shape()},
                         {"dtype", "f32le"},
                         {"offset", payload.size()},
                         {"nbytes", 4 * t.size()}});
        append_f32le(payload, t);
    }
    const std::string text = header.dump();
    std::string out = std::string(kMagic) + " " + std::to_string(kFormatVersion) + "\n" +
                      std::to_string(text.size()) + "\n" + text + "\n";
    out += payload;
    return out;
}

Container decode_container(const std::string& bytes, const std::string& source) {
    std::size_t pos = bytes.find('\n');
    if (pos == std::string::npos) throw FormatError(source + ": missing container preamble");
    std::istringstream preamble(bytes.substr(0, pos));
    std::string magic;
    int version = 0;
    preamble >> magic >> version;
    if (magic != kMagic) throw FormatError(source + ": not a LIFTCAM container");
    if (version != kFormatVersion) {
        throw FormatError(source + ": unsupported format version " + std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
    }
    const std::size_t len_end = bytes.find('\n', pos + 1);
    if (len_end == std::string::npos) throw FormatError(source + ": missing header length");
    std::size_t header_len = 0;
    try {
        header_len = std::stoull(bytes.substr(pos + 1, len_end - pos - 1));
    } catch (const std::exception&) {
        throw FormatError(source + ": malformed header length");
    }
    const std::size_t header_start = len_end + 1;
    if (header_start + header_len + 1 > bytes.size()) throw FormatError(source + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(header_start, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": malformed header: " + e.what());
    }
    if (!header.contains("version") || header.at("version") != kFormatVersion) {
        throw FormatError(source + ": header version field missing or mismatched");
    }
    const std::size_t payload_start = header_start + header_len + 1;
    const std::size_t payload_size = bytes.size() - payload_start;

    Container container;
    try {
        for (const auto& entry : header.value("tensors", nlohmann::json::array())) {
            const auto name = entry.at("name").get<std::string>();
            if (entry.at("dtype") != "f32le") {
                throw FormatError(source + ": tensor '" + name + "' has unsupported dtype " + entry.at("dtype").dump());
            }
            auto shape = entry.at("shape").get<Shape>();
            const auto offset = entry.at("offset").get<std::size_t>();
            const auto nbytes = entry.at("nbytes").get<std::size_t>();
            if (shape.empty() || nbytes != 4 * shape_numel(shape)) {
                throw FormatError(source + ": tensor '" + name + "' byte count does not match its shape");
            }
            if (offset > payload_size || nbytes > payload_size - offset) {
                throw FormatError(source + ": payload truncated inside tensor '" + name + "' (needs bytes up to " +
                                  std::to_string(offset + nbytes) + ", have " + std::to_string(payload_size) + ")");
            }
            container.add(name, read_f32le(bytes, payload_start + offset, std::move(shape)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": malformed tensor table: " + e.what());
    } catch (const ShapeError& e) {
        throw FormatError(source + ": " + e.what());
    }
    header.erase("tensors");
    header.erase("version");
    container.meta = std::move(header);
    return container;
}

void write_container(const std::filesystem::path& path, const Container& container) {
    write_file(path, encode_container(container));
}

Container read_container(const std::filesystem::path& path) { return decode_container(read_file(path), path.string()); }

void save_tensor(const std::filesystem::path& path, const Tensor& tensor, const std::string& name) {
    Container c;
    c.meta["kind"] = "tensor";
    c.add(name, tensor);
    write_container(path, c);
}

Tensor load_tensor(const std::filesystem::path& path) {
    const Container c = read_container(path);
    if (c.tensors.size() != 1) throw FormatError(path.string() + ": expected exactly one tensor");
    return c.tensors.front().second;
}

Container model_to_container(const ModelGraph& model) {
    Container c;
    c.meta["kind"] = "model";
    c.meta["input_shape"] = model.input_shape();
    c.meta["split"] = model.frontend().size();
    c.meta["num_classes"] = model.num_classes();
    if (!model.class_names().empty()) c.meta["class_names"] = model.class_names();
    auto& layers = c.meta["layers"] = nlohmann::json::array();
    auto emit = [&](const Layer& layer, std::size_t index) {
        const std::string name = layer.name.empty() ? "layer" + std::to_string(index) : layer.name;
        nlohmann::json rec{{"kind", std::string(to_string(layer.kind))}, {"name", name}};
        switch (layer.kind) {
            case LayerKind::Conv2d:
                rec["stride"] = layer.stride;
                rec["padding"] = layer.padding;
                [[fallthrough]];
            case LayerKind::Dense:
                rec["weight"] = name + ".weight";
                rec["bias"] = name + ".bias";
                c.add(name + ".weight", layer.weights);
                c.add(name + ".bias", layer.bias);
                break;
            case LayerKind::MaxPool:
            case LayerKind::AvgPool:
                rec["window"] = layer.window;
                rec["stride"] = layer.stride;
                break;
            default:
                break;
        }
        layers.push_back(std::move(rec));
    };
    std::size_t index = 0;
    for (const auto& layer : model.frontend()) emit(layer, index++);
    for (const auto& layer : model.head()) emit(layer, index++);
    return c;
}

ModelGraph model_from_container(const Container& container) {
    const auto& meta = container.meta;
    if (meta.value("kind", std::string{}) != "model") throw FormatError("container is not a model file");
    try {
        const auto input_shape = meta.at("input_shape").get<Shape>();
        const auto split = meta.at("split").get<std::size_t>();
        const auto num_classes = meta.at("num_classes").get<std::size_t>();
        const auto class_names = meta.value("class_names", std::vector<std::string>{});
        const auto& records = meta.at("layers");
        if (split > records.size()) {
            throw FormatError("split index " + std::to_string(split) + " exceeds layer count " +
                              std::to_string(records.size()));
        }
        std::vector<Layer> frontend, head;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& rec = records[i];
            const std::string name = rec.value("name", "layer" + std::to_string(i));
            const std::string kind_name = rec.at("kind").get<std::string>();
            Layer layer;
            try {
                layer.kind = parse_layer_kind(kind_name);
            } catch (const ShapeError&) {
                throw FormatError("layer " + std::to_string(i) + " ('" + name + "'): unknown layer kind '" + kind_name +
                                  "'");
            }
            layer.name = name;
            layer.stride = rec.value("stride", std::size_t{1});
            layer.padding = rec.value("padding", std::size_t{0});
            layer.window = rec.value("window", std::size_t{0});
            if (layer.kind == LayerKind::Conv2d || layer.kind == LayerKind::Dense) {
                auto resolve = [&](const char* key) {
                    const std::string ref = rec.at(key).get<std::string>();
                    const Tensor* t = container.find(ref);
                    if (!t) {
                        throw FormatError("layer " + std::to_string(i) + " ('" + name + "'): missing tensor '" + ref +
                                          "'");
                    }
                    return *t;
                };
                layer.weights = resolve("weight");
                layer.bias = resolve("bias");
            }
            (i < split ? frontend : head).push_back(std::move(layer));
        }
        return ModelGraph(input_shape, std::move(frontend), std::move(head), num_classes, class_names);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model header: ") + e.what());
    } catch (const ShapeError& e) {
        throw FormatError(std::string("model shape check failed: ") + e.what());
    }
}

void save_model(const ModelGraph& model, const std::filesystem::path& path) {
    write_container(path, model_to_container(model));
}

ModelGraph load_model(const std::filesystem::path& path) {
    const Container c = read_container(path);
    try {
        return model_from_container(c);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_sample(const SampleFile& sample, const std::filesystem::path& path) {
    Container c;
    c.meta["kind"] = "sample";
    c.meta["name"] = sample.name;
    c.meta["target_class"] = sample.target_class;
    if (sample.bbox) {
        const auto& b = *sample.bbox;
        c.meta["bbox"] = {{"top", b.top}, {"left", b.left}, {"bottom", b.bottom}, {"right", b.right}};
    }
    if (sample.reference_logits) c.meta["reference_logits"] = *sample.reference_logits;
    c.add("image", sample.image);
    if (sample.reference_activations) c.add("activations", *sample.reference_activations);
    if (sample.reference_gradient) c.add("gradient", *sample.reference_gradient);
    write_container(path, c);
}

SampleFile load_sample(const std::filesystem::path& path) {
    const Container c = read_container(path);
    const auto& meta = c.meta;
    if (meta.value("kind", std::string{}) != "sample") throw FormatError(path.string() + ": not a sample file");
    SampleFile s;
    try {
        s.name = meta.value("name", path.stem().string());
        s.target_class = meta.at("target_class").get<std::size_t>();
        s.image = c.tensor("image");
        if (s.image.rank() != 3) {
            throw FormatError(path.string() + ": image must be C×H×W, got " + shape_to_string(s.image.shape()));
        }
        if (meta.contains("bbox")) {
            const auto& b = meta.at("bbox");
            s.bbox = BoundingBox{b.at("top").get<std::size_t>(), b.at("left").get<std::size_t>(),
                                 b.at("bottom").get<std::size_t>(), b.at("right").get<std::size_t>()};
            s.bbox->validate(s.image.dim(1), s.image.dim(2));
        }
        if (meta.contains("reference_logits")) s.reference_logits = meta.at("reference_logits").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": malformed sample header: " + e.what());
    } catch (const ShapeError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (const Tensor* a = c.find("activations")) s.reference_activations = *a;
    if (const Tensor* g = c.find("gradient")) s.reference_gradient = *g;
    return s;
}

}  // namespace liftcam::io
