#include "paradock/error.hpp"

namespace paradock {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::NearSingular: return "NearSingular";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::EmptyStructure: return "EmptyStructure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NoContacts: return "NoContacts";
    case ErrorCode::DegenerateHead: return "DegenerateHead";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace paradock
