// Thin typed client for the annotation service. Shapes mirror the server's
// JSON exactly; no client-side reinterpretation.

export type DocumentInfo = {
  id: string;
  text: string;
  note_type: string | null;
  section: string | null;
};

export type AnnotationInfo = {
  id: string;
  doc_id: string;
  start: number; // Unicode scalar offsets
  end: number;
  cuis: string[];
  cui_less: boolean;
  annotator_id: string;
  status: "proposed" | "accepted" | "rejected";
  created_at: string;
};

export type Suggestion = {
  cui: string;
  preferred_name: string;
  semantic_types: string[];
  synonym_count: number;
  matched_stem_count: number;
  concept_stem_count: number;
};

export type SuggestionResult = {
  query: string;
  normalized_query: string;
  k: number;
  direct: Suggestion[];
  partial: Suggestion[];
};

export type LintFinding = {
  rule: string;
  severity: "error" | "warning" | "info";
  doc_id: string | null;
  annotation_id: string | null;
  start: number | null;
  end: number | null;
  message: string;
};

export type Health = {
  status: string;
  concepts: number;
  documents: number;
};

export type AnnotationWrite = {
  start: number;
  end: number;
  cuis: string[];
  cui_less: boolean;
  annotator_id: string;
};

export class ApiError extends Error {
  status: number;
  findings: LintFinding[];

  constructor(status: number, detail: string, findings: LintFinding[] = []) {
    super(detail);
    this.status = status;
    this.findings = findings;
  }
}

const request = async <T>(
  baseUrl: string,
  method: string,
  path: string,
  body?: unknown
): Promise<T> => {
  const init: RequestInit = { method };
  if (body !== undefined) {
    init.headers = { "Content-Type": "application/json" };
    init.body = JSON.stringify(body);
  }
  const resp = await fetch(baseUrl + path, init);
  const text = await resp.text();
  const payload = text ? JSON.parse(text) : null;
  if (!resp.ok) {
    const detail =
      payload && typeof payload.detail === "string"
        ? payload.detail
        : `request failed with status ${resp.status}`;
    const findings =
      payload && Array.isArray(payload.findings) ? payload.findings : [];
    throw new ApiError(resp.status, detail, findings);
  }
  return payload as T;
};

export const createClient = (baseUrl: string) => ({
  health: () => request<Health>(baseUrl, "GET", "/api/health"),

  listDocuments: () => request<DocumentInfo[]>(baseUrl, "GET", "/api/documents"),

  getDocument: (id: string) =>
    request<DocumentInfo>(baseUrl, "GET", `/api/documents/${encodeURIComponent(id)}`),

  createDocument: (doc: { id?: string; text: string }) =>
    request<DocumentInfo>(baseUrl, "POST", "/api/documents", doc),

  suggest: (q: string, k: number) =>
    request<SuggestionResult>(
      baseUrl,
      "GET",
      `/api/suggest?q=${encodeURIComponent(q)}&k=${k}`
    ),

  listAnnotations: (docId: string) =>
    request<AnnotationInfo[]>(
      baseUrl,
      "GET",
      `/api/documents/${encodeURIComponent(docId)}/annotations`
    ),

  createAnnotation: (docId: string, ann: AnnotationWrite) =>
    request<AnnotationInfo>(
      baseUrl,
      "POST",
      `/api/documents/${encodeURIComponent(docId)}/annotations`,
      ann
    ),

  updateAnnotation: (annId: string, ann: AnnotationWrite) =>
    request<AnnotationInfo>(
      baseUrl,
      "PUT",
      `/api/annotations/${encodeURIComponent(annId)}`,
      ann
    ),

  deleteAnnotation: (annId: string) =>
    request<AnnotationInfo>(
      baseUrl,
      "DELETE",
      `/api/annotations/${encodeURIComponent(annId)}`
    ),

  setStatus: (annId: string, status: "accepted" | "rejected") =>
    request<AnnotationInfo>(
      baseUrl,
      "POST",
      `/api/annotations/${encodeURIComponent(annId)}/status`,
      { status }
    ),

  autotag: (docId: string) =>
    request<AnnotationInfo[]>(
      baseUrl,
      "POST",
      `/api/autotag/${encodeURIComponent(docId)}`
    ),
});

export type ApiClient = ReturnType<typeof createClient>;
