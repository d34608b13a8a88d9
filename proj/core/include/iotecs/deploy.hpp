// Deploy descriptor emission. Nodes on Docker platforms get a container run
// descriptor (with cpu/memory limits when constrained), VM platforms a
// provisioning manifest, Native platforms a plain launch line. Executing the
// descriptors is the user's responsibility.
#pragma once

#include "iotecs/topology.hpp"

#include <filesystem>
#include <string>

namespace iotecs {

void emit_deploy_descriptors(const ResolvedTopology& topo,
                             const std::filesystem::path& out_dir,
                             const std::string& worker_cmd,
                             const std::string& topology_path);

} // namespace iotecs
