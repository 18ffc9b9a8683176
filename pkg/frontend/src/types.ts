// Wire types mirroring the gateway's documented JSON API (docs/api.md).
// All offsets are Unicode scalar-value indices; convert at the DOM boundary
// with the helpers in offsets.ts.

export interface SpanInfo {
  start: number;
  end: number;
  surface: string;
  category: string;
  confidence: number;
  source: "auto" | "manual";
}

export interface Replacement {
  source_start: number;
  source_end: number;
  original: string;
  placeholder: string;
  secured_start: number;
  secured_end: number;
}

export interface RehydrationHit {
  start: number;
  end: number;
  placeholder: string;
  original: string;
}

export interface ManualSpan {
  start: number;
  end: number;
  substitute?: string | null;
  category?: string | null;
}

export interface DetectResponse {
  spans: SpanInfo[];
  backend: string;
  degraded: boolean;
}

export interface RedactResponse {
  session_id: string;
  secured_text: string;
  replacements: Replacement[];
  spans: SpanInfo[];
  degraded: boolean;
}

export interface RehydrateResponse {
  restored: string;
  hits: RehydrationHit[];
}

export interface SurrogateInfo {
  persona: string;
  surrogate_text: string;
  instruction_suffix: string;
  full_text: string;
  generator: "template" | "local_model";
  source_categories: string[];
  degraded: boolean;
}

export interface ChatRequest {
  prompt: string;
  session_id?: string | null;
  manual_spans?: ManualSpan[];
  redaction?: boolean;
  smokescreen?: "on" | "off" | "auto";
  upstream?: string;
  stream?: boolean;
}

export interface ChatResponse {
  session_id: string;
  secured_text: string;
  replacements: Replacement[];
  spans: SpanInfo[];
  surrogate: SurrogateInfo | null;
  degraded: Record<string, boolean>;
  reply: {
    raw: string;
    restored: string;
    hits: RehydrationHit[];
  };
}

export interface FileRedactResponse {
  session_id: string;
  filename: string;
  outbound_filename: string;
  original_format: string;
  outbound_format: string;
  extracted_text: string;
  extraction_map: [number, number][];
  spans: SpanInfo[];
  secured_text: string;
  replacements: Replacement[];
}

export interface SessionEntry {
  placeholder: string;
  original: string;
  category: string;
  origin: string;
  allocated_turn: number;
}

export interface SessionInfo {
  session_id: string;
  turn: number;
  entries: SessionEntry[];
}

export interface GatewayError {
  code: string;
  message: string;
  detail?: unknown;
}
