#pragma once

namespace tdrl {

int run_cli(int argc, char** argv);

}  // namespace tdrl
