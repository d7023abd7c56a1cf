#include "hfev/io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hfev::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw Error(errc::io, "cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
    out << std::setprecision(17);
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// key=value lines; '#' and ';' comments; blank lines ignored.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(errc::io, path.string() + ":" + std::to_string(lineno) +
                                      ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv,
                           const std::string& key, const std::filesystem::path& path) {
    const auto it = kv.find(key);
    if (it == kv.end())
        throw Error(errc::io, path.string() + ": missing key '" + key + "'");
    return it->second;
}

double parse_number(const std::string& text, const std::filesystem::path& path) {
    std::size_t used = 0;
    try {
        const double v = std::stod(text, &used);
        if (trim(text.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw Error(errc::io, path.string() + ": bad number '" + text + "'");
}

Vec3 parse_vec3(const std::string& text, const std::filesystem::path& path) {
    std::istringstream in(text);
    Vec3 v;
    if (!(in >> v.x() >> v.y() >> v.z()))
        throw Error(errc::io, path.string() + ": expected three numbers, got '" + text + "'");
    return v;
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta");
}

std::string kind_name(VolumeKind kind) {
    switch (kind) {
        case VolumeKind::grey: return "grey";
        case VolumeKind::density: return "density";
        case VolumeKind::mask: return "mask";
    }
    throw Error(errc::contract, "unknown volume kind");
}

VolumeKind kind_from_name(const std::string& name, const std::filesystem::path& path) {
    if (name == "grey") return VolumeKind::grey;
    if (name == "density") return VolumeKind::density;
    if (name == "mask") return VolumeKind::mask;
    throw Error(errc::io, path.string() + ": unknown volume kind '" + name + "'");
}

} // namespace

void write_volume(const VoxelVolume& volume, const std::filesystem::path& raw_path) {
    volume.validate();
    {
        auto meta = open_out(sidecar(raw_path));
        meta << "dims = " << volume.dims[0] << ' ' << volume.dims[1] << ' '
             << volume.dims[2] << '\n'
             << "spacing_mm = " << volume.spacing.x() << ' ' << volume.spacing.y() << ' '
             << volume.spacing.z() << '\n'
             << "origin_mm = " << volume.origin.x() << ' ' << volume.origin.y() << ' '
             << volume.origin.z() << '\n'
             << "dtype = float32\n"
             << "kind = " << kind_name(volume.kind) << '\n';
    }
    auto raw = open_out(raw_path, true);
    raw.write(reinterpret_cast<const char*>(volume.values.data()),
              static_cast<std::streamsize>(volume.values.size() * sizeof(float)));
    if (!raw) throw Error(errc::io, "short write to " + raw_path.string());
}

VoxelVolume read_volume(const std::filesystem::path& raw_path) {
    const auto meta_path = sidecar(raw_path);
    const auto kv = read_key_values(meta_path);

    VoxelVolume volume;
    {
        std::istringstream dims(require(kv, "dims", meta_path));
        if (!(dims >> volume.dims[0] >> volume.dims[1] >> volume.dims[2]))
            throw Error(errc::io, meta_path.string() + ": bad dims");
    }
    volume.spacing = parse_vec3(require(kv, "spacing_mm", meta_path), meta_path);
    volume.origin = parse_vec3(require(kv, "origin_mm", meta_path), meta_path);
    if (require(kv, "dtype", meta_path) != "float32")
        throw Error(errc::io, meta_path.string() + ": unsupported dtype");
    volume.kind = kind_from_name(require(kv, "kind", meta_path), meta_path);

    auto raw = open_in(raw_path, true);
    const std::size_t count = static_cast<std::size_t>(volume.dims[0]) * volume.dims[1] *
                              static_cast<std::size_t>(volume.dims[2]);
    volume.values.resize(count);
    raw.read(reinterpret_cast<char*>(volume.values.data()),
             static_cast<std::streamsize>(count * sizeof(float)));
    if (raw.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
        throw Error(errc::io, raw_path.string() + ": payload shorter than dims imply");
    volume.validate();
    return volume;
}

void write_calibration(const DensityCalibration& cal, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "slope = " << cal.slope << '\n'
        << "intercept = " << cal.intercept << '\n'
        << "correction_scale = " << cal.correction_scale << '\n'
        << "correction_offset = " << cal.correction_offset << '\n';
}

DensityCalibration read_calibration(const std::filesystem::path& path) {
    const auto kv = read_key_values(path);
    DensityCalibration cal;
    cal.slope = parse_number(require(kv, "slope", path), path);
    cal.intercept = parse_number(require(kv, "intercept", path), path);
    cal.correction_scale = parse_number(require(kv, "correction_scale", path), path);
    cal.correction_offset = parse_number(require(kv, "correction_offset", path), path);
    return cal;
}

void write_mesh(const Tet10Mesh& mesh, const std::filesystem::path& path,
                const std::map<std::string, std::vector<double>>& attributes) {
    mesh.validate();
    for (const auto& [name, values] : attributes)
        if (values.size() != static_cast<std::size_t>(mesh.element_count()))
            throw Error(errc::contract, "attribute '" + name + "' is not per-element");
    auto out = open_out(path);
    out << "nodes " << mesh.node_count() << '\n';
    for (int n = 0; n < mesh.node_count(); ++n)
        out << n << ' ' << mesh.nodes[n].x() << ' ' << mesh.nodes[n].y() << ' '
            << mesh.nodes[n].z() << '\n';
    out << "elements " << mesh.element_count() << '\n';
    for (int e = 0; e < mesh.element_count(); ++e) {
        out << e;
        for (int n : mesh.elements[e]) out << ' ' << n;
        out << '\n';
    }
    for (const auto& [name, values] : attributes) {
        out << "attribute " << name << '\n';
        for (int e = 0; e < mesh.element_count(); ++e) out << e << ' ' << values[e] << '\n';
    }
}

MeshFile read_mesh(const std::filesystem::path& path) {
    auto in = open_in(path);
    MeshFile out;
    std::string word;
    if (!(in >> word) || word != "nodes")
        throw Error(errc::io, path.string() + ": expected 'nodes <count>'");
    int count = 0;
    if (!(in >> count) || count < 0) throw Error(errc::io, path.string() + ": bad node count");
    out.mesh.nodes.resize(count);
    for (int n = 0; n < count; ++n) {
        int id;
        Vec3 p;
        if (!(in >> id >> p.x() >> p.y() >> p.z()) || id != n)
            throw Error(errc::io, path.string() + ": bad node line " + std::to_string(n));
        out.mesh.nodes[n] = p;
    }
    if (!(in >> word) || word != "elements")
        throw Error(errc::io, path.string() + ": expected 'elements <count>'");
    if (!(in >> count) || count < 0)
        throw Error(errc::io, path.string() + ": bad element count");
    out.mesh.elements.resize(count);
    for (int e = 0; e < count; ++e) {
        int id;
        if (!(in >> id) || id != e)
            throw Error(errc::io, path.string() + ": bad element line " + std::to_string(e));
        for (int& n : out.mesh.elements[e])
            if (!(in >> n))
                throw Error(errc::io,
                            path.string() + ": bad element line " + std::to_string(e));
    }
    while (in >> word) {
        if (word != "attribute")
            throw Error(errc::io, path.string() + ": unexpected token '" + word + "'");
        std::string name;
        if (!(in >> name)) throw Error(errc::io, path.string() + ": attribute needs a name");
        auto& values = out.attributes[name];
        values.resize(count);
        for (int e = 0; e < count; ++e) {
            int id;
            if (!(in >> id >> values[e]) || id != e)
                throw Error(errc::io, path.string() + ": bad attribute line for '" + name +
                                          "' element " + std::to_string(e));
        }
    }
    out.mesh.validate();
    return out;
}

void write_transform(const RigidTransform& transform, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out << transform.rotation(r, c) << ' ';
        out << transform.translation(r) << '\n';
    }
}

RigidTransform read_transform(const std::filesystem::path& path) {
    auto in = open_in(path);
    RigidTransform t;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
            if (!(in >> t.rotation(r, c)))
                throw Error(errc::io, path.string() + ": expected 12 numbers");
        if (!(in >> t.translation(r)))
            throw Error(errc::io, path.string() + ": expected 12 numbers");
    }
    t.validate();
    return t;
}

void write_materials(const MaterialField& materials, const std::filesystem::path& path) {
    materials.validate();
    auto out = open_out(path);
    out << "element_id,density,E,nu,sigma_y,Ep\n";
    for (int e = 0; e < materials.element_count(); ++e) {
        out << e << ',' << materials.density[e] << ',' << materials.modulus[e] << ','
            << materials.poisson[e] << ',';
        if (materials.has_plasticity)
            out << materials.yield_stress[e] << ',' << materials.hardening_modulus[e];
        else
            out << 0 << ',' << 0;
        out << '\n';
    }
}

MaterialField read_materials(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "element_id,density,E,nu,sigma_y,Ep")
        throw Error(errc::io, path.string() + ": bad material CSV header");
    MaterialField m;
    int expected = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        int id;
        double rho, e, nu, sy, ep;
        if (!(row >> id >> rho >> e >> nu >> sy >> ep) || id != expected)
            throw Error(errc::io, path.string() + ": bad material row " +
                                      std::to_string(expected));
        ++expected;
        m.density.push_back(rho);
        m.modulus.push_back(e);
        m.poisson.push_back(nu);
        m.yield_stress.push_back(sy);
        m.hardening_modulus.push_back(ep);
    }
    if (m.density.empty()) throw Error(errc::io, path.string() + ": no material rows");
    m.has_plasticity =
        std::any_of(m.yield_stress.begin(), m.yield_stress.end(), [](double v) { return v > 0; });
    if (!m.has_plasticity) {
        m.yield_stress.clear();
        m.hardening_modulus.clear();
    }
    m.validate();
    return m;
}

void write_dvc_grid(const DvcGrid& grid, const std::filesystem::path& csv_path) {
    grid.validate();
    {
        auto meta = open_out(sidecar(csv_path));
        meta << "dims = " << grid.dims[0] << ' ' << grid.dims[1] << ' ' << grid.dims[2] << '\n'
             << "spacing = " << grid.spacing.x() << ' ' << grid.spacing.y() << ' '
             << grid.spacing.z() << '\n'
             << "origin = " << grid.origin.x() << ' ' << grid.origin.y() << ' '
             << grid.origin.z() << '\n'
             << "units = mm\n";
    }
    auto out = open_out(csv_path);
    out << "i,j,k,x_mm,y_mm,z_mm,ux,uy,uz,correlate,inside_bone\n";
    for (int k = 0; k < grid.dims[2]; ++k)
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int i = 0; i < grid.dims[0]; ++i) {
                const std::size_t n = grid.index(i, j, k);
                const Vec3 p = grid.point(i, j, k);
                const Vec3& u = grid.displacement[n];
                out << i << ',' << j << ',' << k << ',' << p.x() << ',' << p.y() << ','
                    << p.z() << ',' << u.x() << ',' << u.y() << ',' << u.z() << ','
                    << int(grid.correlated[n]) << ',' << int(grid.inside_bone[n]) << '\n';
            }
}

DvcGrid read_dvc_grid(const std::filesystem::path& csv_path) {
    const auto meta_path = sidecar(csv_path);
    const auto kv = read_key_values(meta_path);
    DvcGrid grid;
    {
        std::istringstream dims(require(kv, "dims", meta_path));
        if (!(dims >> grid.dims[0] >> grid.dims[1] >> grid.dims[2]))
            throw Error(errc::io, meta_path.string() + ": bad dims");
    }
    grid.spacing = parse_vec3(require(kv, "spacing", meta_path), meta_path);
    grid.origin = parse_vec3(require(kv, "origin", meta_path), meta_path);
    const std::string units = require(kv, "units", meta_path);
    double to_mm = 1.0;
    if (units == "um" || units == "µm" || units == "μm") to_mm = 1e-3;
    else if (units != "mm")
        throw Error(errc::io, meta_path.string() + ": units must be mm or um");

    if (grid.dims[0] < 1 || grid.dims[1] < 1 || grid.dims[2] < 1)
        throw Error(errc::io, meta_path.string() + ": bad dims");
    grid.displacement.assign(grid.point_count(), Vec3::Zero());
    grid.correlated.assign(grid.point_count(), 0);
    grid.inside_bone.assign(grid.point_count(), 0);

    auto in = open_in(csv_path);
    std::string line;
    if (!std::getline(in, line) ||
        trim(line) != "i,j,k,x_mm,y_mm,z_mm,ux,uy,uz,correlate,inside_bone")
        throw Error(errc::io, csv_path.string() + ": bad DVC CSV header");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        int i, j, k, corr, inside;
        double x, y, z, ux, uy, uz;
        if (!(row >> i >> j >> k >> x >> y >> z >> ux >> uy >> uz >> corr >> inside))
            throw Error(errc::io, csv_path.string() + ": bad DVC row " + line);
        if (i < 0 || i >= grid.dims[0] || j < 0 || j >= grid.dims[1] || k < 0 ||
            k >= grid.dims[2])
            throw Error(errc::io, csv_path.string() + ": DVC row index out of range");
        const std::size_t n = grid.index(i, j, k);
        grid.displacement[n] = to_mm * Vec3(ux, uy, uz);
        grid.correlated[n] = corr ? 1 : 0;
        grid.inside_bone[n] = inside ? 1 : 0;
        ++rows;
    }
    if (rows != grid.point_count())
        throw Error(errc::io, csv_path.string() + ": expected " +
                                  std::to_string(grid.point_count()) + " rows, found " +
                                  std::to_string(rows));
    grid.validate();
    return grid;
}

void write_solution_nodes(const Solution& sol, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "id,ux,uy,uz\n";
    for (Eigen::Index n = 0; n < sol.displacements.rows(); ++n)
        out << n << ',' << sol.displacements(n, 0) << ',' << sol.displacements(n, 1) << ','
            << sol.displacements(n, 2) << '\n';
}

void write_solution_elements(const Solution& sol, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "id,exx,eyy,ezz,gxy,gyz,gxz,eps1,eps2,eps3,von_mises\n";
    for (Eigen::Index e = 0; e < sol.element_strains.rows(); ++e) {
        const Eigen::Matrix<double, 6, 1> eps = sol.element_strains.row(e).transpose();
        const Eigen::Vector3d principal = principal_strains(eps);
        out << e;
        for (int c = 0; c < 6; ++c) out << ',' << eps(c);
        for (int c = 0; c < 3; ++c) out << ',' << principal(c);
        out << ',' << von_mises(sol.element_stresses.row(e).transpose()) << '\n';
    }
}

void write_vtk(const Tet10Mesh& mesh, const Solution& sol,
               const std::filesystem::path& path) {
    if (sol.displacements.rows() != mesh.node_count() ||
        sol.element_strains.rows() != mesh.element_count())
        throw Error(errc::contract, "solution does not match the mesh");
    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\n"
        << "hfev solution\n"
        << "ASCII\n"
        << "DATASET UNSTRUCTURED_GRID\n"
        << "POINTS " << mesh.node_count() << " double\n";
    for (const auto& p : mesh.nodes) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    out << "CELLS " << mesh.element_count() << ' ' << 11 * mesh.element_count() << '\n';
    for (const auto& el : mesh.elements) {
        out << 10;
        for (int n : el) out << ' ' << n;
        out << '\n';
    }
    out << "CELL_TYPES " << mesh.element_count() << '\n';
    for (int e = 0; e < mesh.element_count(); ++e) out << 24 << '\n';
    out << "POINT_DATA " << mesh.node_count() << '\n'
        << "VECTORS displacement double\n";
    for (Eigen::Index n = 0; n < sol.displacements.rows(); ++n)
        out << sol.displacements(n, 0) << ' ' << sol.displacements(n, 1) << ' '
            << sol.displacements(n, 2) << '\n';
    out << "CELL_DATA " << mesh.element_count() << '\n'
        << "SCALARS von_mises double 1\n"
        << "LOOKUP_TABLE default\n";
    for (Eigen::Index e = 0; e < sol.element_stresses.rows(); ++e)
        out << von_mises(sol.element_stresses.row(e).transpose()) << '\n';
    out << "SCALARS eps1 double 1\n"
        << "LOOKUP_TABLE default\n";
    std::vector<double> eps3(sol.element_strains.rows());
    for (Eigen::Index e = 0; e < sol.element_strains.rows(); ++e) {
        const Eigen::Vector3d principal =
            principal_strains(sol.element_strains.row(e).transpose());
        out << principal(0) << '\n';
        eps3[e] = principal(2);
    }
    out << "SCALARS eps3 double 1\n"
        << "LOOKUP_TABLE default\n";
    for (double v : eps3) out << v << '\n';
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) != 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    if (s != sections.end()) {
        const auto k = s->second.find(key);
        if (k != s->second.end()) return k->second;
    }
    throw Error(errc::io, "config is missing [" + section + "] " + key);
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double ConfigFile::number(const std::string& section, const std::string& key) const {
    return parse_number(get(section, key), "config [" + section + "] " + key);
}

double ConfigFile::number_or(const std::string& section, const std::string& key,
                             double fallback) const {
    return has(section, key) ? number(section, key) : fallback;
}

bool ConfigFile::flag_or(const std::string& section, const std::string& key,
                         bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw Error(errc::io, "config [" + section + "] " + key + ": bad boolean '" + v + "'");
}

ConfigFile read_config(const std::filesystem::path& path) {
    auto in = open_in(path);
    ConfigFile cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(errc::io, path.string() + ":" + std::to_string(lineno) +
                                          ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections[section]; // record empty sections too
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(errc::io, path.string() + ":" + std::to_string(lineno) +
                                      ": expected key=value");
        cfg.sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

} // namespace hfev::io
