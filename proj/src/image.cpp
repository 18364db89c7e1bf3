#include "foregan/image.hpp"

#include <cstring>

#include "foregan/errors.hpp"

namespace foregan {

Tensor replicate_channels(const Tensor& mono, int channels) {
    if (mono.rank() != 3 || mono.dim(0) != 1)
        throw ShapeError("replicate_channels: expected (1,H,W) input");
    const int h = mono.dim(1), w = mono.dim(2);
    Tensor out({channels, h, w});
    for (int c = 0; c < channels; ++c)
        std::memcpy(out.data() + static_cast<std::size_t>(c) * h * w, mono.data(),
                    static_cast<std::size_t>(h) * w * sizeof(double));
    return out;
}

} // namespace foregan
