/**
 * Typed client for the inference service HTTP API.
 */

export interface OperatorInfo {
  name: string;
  bounds: [number, number][];
  sampling: "log" | "linear";
  param_dim: number;
}

export interface InferResult {
  blob: Blob;
  psnr: number | null;
  ssim: number | null;
}

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
    public body: unknown,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<boolean> {
    try {
      const r = await this.fetchFn(this.url("/health"));
      return r.ok;
    } catch {
      return false;
    }
  }

  async operators(): Promise<OperatorInfo[]> {
    const r = await this.fetchFn(this.url("/operators"));
    if (!r.ok) throw new ApiError("failed to list operators", r.status, await r.text());
    return (await r.json()) as OperatorInfo[];
  }

  async infer(
    image: Blob,
    operator: string,
    param: number,
    reference?: Blob | null,
  ): Promise<InferResult> {
    const form = new FormData();
    form.append("image", image, "input.png");
    form.append("operator", operator);
    form.append("param", String(param));
    if (reference) form.append("reference", reference, "reference.png");
    const r = await this.fetchFn(this.url("/infer"), { method: "POST", body: form });
    if (!r.ok) {
      let body: unknown = null;
      try {
        body = await r.json();
      } catch {
        body = await r.text();
      }
      throw new ApiError(`inference failed (${r.status})`, r.status, body);
    }
    const psnrHeader = r.headers.get("X-PSNR");
    const ssimHeader = r.headers.get("X-SSIM");
    return {
      blob: await r.blob(),
      psnr: psnrHeader === null ? null : Number(psnrHeader),
      ssim: ssimHeader === null ? null : Number(ssimHeader),
    };
  }

  async rfOverlay(x: number, y: number, gamma: number, operator?: string): Promise<Blob> {
    const params = new URLSearchParams({ x: String(x), y: String(y), gamma: String(gamma) });
    if (operator) params.set("operator", operator);
    const r = await this.fetchFn(this.url(`/rf?${params.toString()}`));
    if (!r.ok) throw new ApiError(`rf query failed (${r.status})`, r.status, await r.text());
    return await r.blob();
  }
}
