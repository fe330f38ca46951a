#include "seg4d/mlp.hpp"

namespace seg4d {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: break;
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw StructuralError("unknown activation '" + name + "'");
}

}  // namespace seg4d
