#include "janus/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "janus/config_json.hpp"

namespace janus {

namespace {

std::vector<std::pair<std::string, Tensor*>> named_tensors(JanusModel& m) {
    std::vector<std::pair<std::string, Tensor*>> out;
    const auto add_seq = [&out](const std::string& prefix, Sequential& seq) {
        for (std::size_t i = 0; i < seq.params.size(); ++i) {
            if (seq.params[i].weights.numel() == 0) continue;
            out.emplace_back(prefix + "." + std::to_string(i) + ".weights",
                             &seq.params[i].weights);
            out.emplace_back(prefix + "." + std::to_string(i) + ".biases", &seq.params[i].biases);
        }
    };
    add_seq("encoder", m.encoder);
    add_seq("decoder", m.decoder);
    out.emplace_back("khronos.alpha", &m.khronos.alpha);
    if (m.has_latent_stats()) {
        out.emplace_back("latent_mean", &m.latent_mean);
        out.emplace_back("latent_std", &m.latent_std);
    }
    return out;
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<char*>(b), 2);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 8);
}

struct Reader {
    std::vector<unsigned char> buf;
    std::size_t off = 0;
    std::string path;

    void need(std::size_t n) const {
        if (off + n > buf.size())
            throw ParseError(path + ": truncated at byte offset " + std::to_string(off));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = std::uint32_t(buf[off]) | (std::uint32_t(buf[off + 1]) << 8) |
                          (std::uint32_t(buf[off + 2]) << 16) | (std::uint32_t(buf[off + 3]) << 24);
        off += 4;
        return v;
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = std::uint16_t(buf[off] | (buf[off + 1] << 8));
        off += 2;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return buf[off++];
    }
    double f64() {
        need(8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= std::uint64_t(buf[off + i]) << (8 * i);
        off += 8;
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + off), n);
        off += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const JanusModel& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f.write("JNSC", 4);
    const unsigned char ver = 1;
    f.write(reinterpret_cast<const char*>(&ver), 1);
    nlohmann::json header{{"model", janus_config_to_json(m.cfg)},
                          {"trained_epochs", m.trained_epochs},
                          {"has_latent_stats", m.has_latent_stats()}};
    const std::string hs = header.dump();
    put_u32(f, std::uint32_t(hs.size()));
    f.write(hs.data(), std::streamsize(hs.size()));

    auto tensors = named_tensors(const_cast<JanusModel&>(m));
    put_u32(f, std::uint32_t(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u16(f, std::uint16_t(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        const unsigned char nd = static_cast<unsigned char>(t->ndim());
        f.write(reinterpret_cast<const char*>(&nd), 1);
        for (int d : t->shape) put_u32(f, std::uint32_t(d));
        for (double v : t->data) put_f64(f, v);
    }
    if (!f) throw ParseError("write failed for " + path);
}

JanusModel load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ParseError("cannot open " + path);
        f.seekg(0, std::ios::end);
        r.buf.resize(std::size_t(f.tellg()));
        f.seekg(0);
        if (!r.buf.empty()) f.read(reinterpret_cast<char*>(r.buf.data()), std::streamsize(r.buf.size()));
        if (!f) throw ParseError("short read from " + path);
    }
    if (r.str(4) != "JNSC") throw ParseError(path + ": bad magic (want \"JNSC\")");
    const int ver = r.u8();
    if (ver != 1) throw ParseError(path + ": unsupported version " + std::to_string(ver));
    const std::uint32_t hlen = r.u32();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.str(hlen));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": bad JSON header: " + e.what());
    }
    const JanusConfig cfg =
        janus_config_from_json(header.at("model"), JanusConfig::micro_default());
    const int epochs = header.at("trained_epochs").get<int>();
    const bool has_stats = header.at("has_latent_stats").get<bool>();

    JanusModel m = build_janus(cfg, 0);
    m.trained_epochs = epochs;
    if (has_stats) {
        m.latent_mean = Tensor({cfg.latent_dim});
        m.latent_std = Tensor({cfg.latent_dim});
        m.latent_std.fill(1.0);  // placeholder so named_tensors lists the stats
    }

    const std::uint32_t count = r.u32();
    std::map<std::string, Tensor> table;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str(r.u16());
        const int nd = r.u8();
        std::vector<int> shape(static_cast<std::size_t>(nd));
        for (int d = 0; d < nd; ++d) shape[std::size_t(d)] = int(r.u32());
        Tensor t(shape);
        for (std::size_t k = 0; k < t.numel(); ++k) t.data[k] = r.f64();
        if (!table.emplace(name, std::move(t)).second)
            throw ParseError(path + ": duplicate tensor \"" + name + "\"");
    }
    if (r.off != r.buf.size())
        throw ParseError(path + ": " + std::to_string(r.buf.size() - r.off) +
                         " trailing bytes after tensor table");

    auto expected = named_tensors(m);
    if (expected.size() != table.size())
        throw ParseError(path + ": tensor table has " + std::to_string(table.size()) +
                         " entries, config implies " + std::to_string(expected.size()));
    for (auto& [name, dst] : expected) {
        const auto it = table.find(name);
        if (it == table.end()) throw ParseError(path + ": missing tensor \"" + name + "\"");
        if (it->second.shape != dst->shape)
            throw ParseError(path + ": tensor \"" + name + "\" has shape " +
                             shape_str(it->second.shape) + ", config implies " +
                             shape_str(dst->shape));
        *dst = std::move(it->second);
    }
    return m;
}

JanusModel load_checkpoint(const std::string& path, const JanusConfig& expected) {
    JanusModel m = load_checkpoint(path);
    if (janus_config_to_json(m.cfg) != janus_config_to_json(expected))
        throw ConfigError(path + ": stored config does not match the expected config");
    return m;
}

}  // namespace janus
