/** Minimal typed client for the mixvis service.
 *
 * Every request is appended to a replayable log; response bodies are kept
 * as raw bytes so panel states can be compared byte-for-byte.
 */

export interface RequestRecord {
  method: "GET" | "POST" | "DELETE";
  path: string;
  body?: unknown;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(`HTTP ${status}: ${message}`);
  }
}

export class ApiClient {
  readonly log: RequestRecord[] = [];
  /** Response bytes aligned with `log`; filled when recordBodies is set. */
  readonly bodies: ArrayBuffer[] = [];

  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
    private readonly recordBodies = false,
  ) {}

  private async run(record: RequestRecord): Promise<ArrayBuffer> {
    this.log.push(record);
    const init: RequestInit = { method: record.method };
    if (record.body !== undefined) {
      init.body = JSON.stringify(record.body);
      init.headers = { "content-type": "application/json" };
    }
    const resp = await this.fetchImpl(this.base + record.path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    const bytes = await resp.arrayBuffer();
    if (this.recordBodies) this.bodies.push(bytes);
    return bytes;
  }

  /** GET returning raw bytes (images and byte-comparison of panels). */
  getRaw(path: string): Promise<ArrayBuffer> {
    return this.run({ method: "GET", path });
  }

  async getJson<T>(path: string): Promise<T> {
    const buf = await this.getRaw(path);
    return JSON.parse(new TextDecoder().decode(buf)) as T;
  }

  async post<T>(path: string, body: unknown): Promise<T> {
    const buf = await this.run({ method: "POST", path, body });
    return JSON.parse(new TextDecoder().decode(buf)) as T;
  }

  async delete<T>(path: string): Promise<T> {
    const buf = await this.run({ method: "DELETE", path });
    return JSON.parse(new TextDecoder().decode(buf)) as T;
  }

  /** Re-issue a recorded request sequence; returns every response body. */
  async replay(log: RequestRecord[]): Promise<ArrayBuffer[]> {
    const out: ArrayBuffer[] = [];
    for (const record of log) {
      out.push(await this.run({ ...record }));
    }
    return out;
  }
}

export function queryString(params: Record<string, string | number>): string {
  const parts = Object.entries(params).map(
    ([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`,
  );
  return parts.length ? `?${parts.join("&")}` : "";
}
