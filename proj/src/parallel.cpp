#include "greenlab/parallel.hpp"

namespace greenlab
{
namespace
{
std::atomic<std::size_t> configured_workers{1};
}

std::size_t worker_count()
{
    return configured_workers.load();
}

void set_worker_count(std::size_t workers)
{
    configured_workers.store(std::max<std::size_t>(1, workers));
}

}  // namespace greenlab
