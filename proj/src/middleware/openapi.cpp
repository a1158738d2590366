#include "hetbridge/middleware/service.hpp"

// Hand-authored API description served at /api/v1/openapi.json. A contract
// test keeps its path/method set equal to Service::routes().

namespace hetbridge::middleware {

namespace {

constexpr const char* kOpenApi = R"json({
  "openapi": "3.0.3",
  "info": {
    "title": "hetbridge middleware",
    "version": "1.0.0",
    "description": "Ingestion and retrieval of IoT device readings arriving through MQTT and CoAP gateways."
  },
  "servers": [{"url": "http://127.0.0.1:8080"}],
  "components": {
    "securitySchemes": {
      "bearerAuth": {"type": "http", "scheme": "bearer", "description": "Opaque 32-hex-character token from POST /api/v1/devices"}
    },
    "schemas": {
      "Protocol": {"type": "string", "enum": ["mqtt", "coap"]},
      "Timestamp": {"type": "string", "pattern": "^\\d{4}-\\d{2}-\\d{2}T\\d{2}:\\d{2}:\\d{2}\\.\\d{6}Z$", "example": "2024-03-01T12:00:00.000000Z"},
      "IngestRecord": {
        "type": "object",
        "additionalProperties": false,
        "required": ["device", "protocol", "message", "origin_ts"],
        "properties": {
          "device": {"type": "string", "pattern": "^[a-z0-9-]{1,64}$"},
          "protocol": {"$ref": "#/components/schemas/Protocol"},
          "message": {"type": "string"},
          "origin_ts": {"$ref": "#/components/schemas/Timestamp"}
        }
      },
      "StoredReading": {
        "type": "object",
        "required": ["id", "device", "protocol", "message", "origin_ts", "inserted_ts", "sec_diff"],
        "properties": {
          "id": {"type": "integer", "minimum": 1},
          "device": {"type": "string"},
          "protocol": {"$ref": "#/components/schemas/Protocol"},
          "message": {"type": "string"},
          "origin_ts": {"$ref": "#/components/schemas/Timestamp"},
          "inserted_ts": {"$ref": "#/components/schemas/Timestamp"},
          "sec_diff": {"type": "number", "description": "inserted_ts - origin_ts in seconds, microsecond resolution"}
        }
      },
      "Registration": {
        "type": "object",
        "required": ["principal_id", "name", "kind", "token", "expires_at"],
        "properties": {
          "principal_id": {"type": "integer", "minimum": 1},
          "name": {"type": "string"},
          "kind": {"type": "string", "enum": ["mqtt", "coap", "gateway"]},
          "token": {"type": "string", "pattern": "^[0-9a-f]{32}$"},
          "expires_at": {"$ref": "#/components/schemas/Timestamp"}
        }
      },
      "Distribution": {
        "type": "object",
        "required": ["mqtt", "coap", "window_s", "from_ts", "to_ts"],
        "properties": {
          "mqtt": {"type": "integer"},
          "coap": {"type": "integer"},
          "window_s": {"type": "integer"},
          "from_ts": {"$ref": "#/components/schemas/Timestamp", "nullable": true},
          "to_ts": {"$ref": "#/components/schemas/Timestamp", "nullable": true}
        }
      },
      "LatencyPoint": {
        "type": "object",
        "required": ["inserted_ts", "sec_diff", "protocol"],
        "properties": {
          "inserted_ts": {"$ref": "#/components/schemas/Timestamp"},
          "sec_diff": {"type": "number"},
          "protocol": {"$ref": "#/components/schemas/Protocol"}
        }
      },
      "Error": {
        "type": "object",
        "required": ["error", "detail"],
        "properties": {
          "error": {"type": "string"},
          "detail": {"type": "string"},
          "reason": {"type": "string", "enum": ["missing", "malformed", "unknown", "expired"]},
          "field": {"type": "string"}
        }
      }
    },
    "responses": {
      "Unauthorized": {"description": "Missing, malformed, unknown or expired token", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}},
      "Invalid": {"description": "Validation failure", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}}
    }
  },
  "paths": {
    "/api/v1/devices": {
      "post": {
        "summary": "Register a device or gateway and receive its bearer token",
        "requestBody": {"required": true, "content": {"application/json": {"schema": {
          "type": "object", "required": ["name", "kind"],
          "properties": {"name": {"type": "string", "minLength": 1}, "kind": {"type": "string", "enum": ["mqtt", "coap", "gateway"]}}}}}},
        "responses": {
          "201": {"description": "Registered; the token is shown only here", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Registration"}}}},
          "409": {"description": "Name already registered and unexpired", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}},
          "422": {"$ref": "#/components/responses/Invalid"}
        }
      }
    },
    "/api/v1/readings": {
      "post": {
        "summary": "Insert one normalized reading",
        "security": [{"bearerAuth": []}],
        "requestBody": {"required": true, "content": {"application/json": {"schema": {"$ref": "#/components/schemas/IngestRecord"}}}},
        "responses": {
          "201": {"description": "Stored", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/StoredReading"}}}},
          "401": {"$ref": "#/components/responses/Unauthorized"},
          "422": {"$ref": "#/components/responses/Invalid"},
          "503": {"description": "Storage unavailable", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}}
        }
      },
      "get": {
        "summary": "Readings, newest first",
        "parameters": [
          {"name": "protocol", "in": "query", "schema": {"$ref": "#/components/schemas/Protocol"}},
          {"name": "since", "in": "query", "schema": {"$ref": "#/components/schemas/Timestamp"}, "description": "inclusive lower bound on inserted_ts"},
          {"name": "until", "in": "query", "schema": {"$ref": "#/components/schemas/Timestamp"}, "description": "exclusive upper bound on inserted_ts"},
          {"name": "limit", "in": "query", "schema": {"type": "integer", "minimum": 1, "maximum": 10000, "default": 100}}
        ],
        "responses": {
          "200": {"description": "Matching readings", "content": {"application/json": {"schema": {"type": "array", "items": {"$ref": "#/components/schemas/StoredReading"}}}}},
          "422": {"$ref": "#/components/responses/Invalid"}
        }
      }
    },
    "/api/v1/stats/distribution": {
      "get": {
        "summary": "Readings per protocol in the last window_s seconds, anchored at the newest reading",
        "parameters": [{"name": "window_s", "in": "query", "required": true, "schema": {"type": "integer", "minimum": 1}}],
        "responses": {
          "200": {"description": "Counts", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Distribution"}}}},
          "422": {"$ref": "#/components/responses/Invalid"}
        }
      }
    },
    "/api/v1/stats/latency": {
      "get": {
        "summary": "Raw travel-time points in the last window_s seconds, oldest first",
        "parameters": [
          {"name": "window_s", "in": "query", "required": true, "schema": {"type": "integer", "minimum": 1}},
          {"name": "protocol", "in": "query", "schema": {"$ref": "#/components/schemas/Protocol"}}
        ],
        "responses": {
          "200": {"description": "Points", "content": {"application/json": {"schema": {"type": "array", "items": {"$ref": "#/components/schemas/LatencyPoint"}}}}},
          "422": {"$ref": "#/components/responses/Invalid"}
        }
      }
    },
    "/api/v1/openapi.json": {
      "get": {
        "summary": "This document",
        "responses": {"200": {"description": "OpenAPI 3.0 description", "content": {"application/json": {"schema": {"type": "object"}}}}}
      }
    }
  }
})json";

}  // namespace

ApiResponse Service::openapi_document() { return {200, kOpenApi}; }

}  // namespace hetbridge::middleware
