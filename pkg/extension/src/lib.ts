// Pure logic shared by the background worker, content script, and options
// page: PR-page detection, DOM-container-to-location mapping, settings, and
// the request/response shapes of the local preview service.

export type Strategy = 'contextual' | 'noncontextual' | 'metadata';
export type LinkLocation = 'description' | 'comment' | 'review_comment';

export const ALL_STRATEGIES: Strategy[] = ['contextual', 'noncontextual', 'metadata'];

export const STRATEGY_LABELS: Record<Strategy, string> = {
  contextual: 'CLS',
  noncontextual: 'NCLS',
  metadata: 'MBS',
};

export interface ExtensionSettings {
  serviceBaseUrl: string;
  defaultStrategies: Strategy[];
  showComparison: boolean;
}

export const DEFAULT_SETTINGS: ExtensionSettings = {
  serviceBaseUrl: 'http://127.0.0.1:8377',
  defaultStrategies: [...ALL_STRATEGIES],
  showComparison: true,
};

export interface ResolvedLocation {
  location: LinkLocation;
  containerId: string;
}

export interface SummarizeRequest {
  link_url: string;
  pr_url: string;
  location: LinkLocation;
  container_id: string;
  strategies: Strategy[];
}

export interface StrategySuccess {
  text: string;
  model_id: string;
  elapsed_ms: number;
}

export interface StrategyFailure {
  error_kind: string;
  message: string;
}

export interface SummarizeResponse {
  results: Record<string, StrategySuccess | StrategyFailure>;
  page_title: string;
  cache_hits: { pr: boolean; page: boolean };
}

export function isStrategySuccess(
  entry: StrategySuccess | StrategyFailure,
): entry is StrategySuccess {
  return 'text' in entry;
}

const PR_PAGE_RE = /^https:\/\/github\.com\/([^/]+)\/([^/]+)\/pull\/(\d+)(\/|$|[?#])/;

/** The canonical PR URL for a page inside a PR, or null off PR pages. */
export function prUrlFromPage(pageUrl: string): string | null {
  const match = PR_PAGE_RE.exec(pageUrl);
  if (!match) return null;
  return `https://github.com/${match[1]}/${match[2]}/pull/${match[3]}`;
}

export function normalizeSettings(raw: unknown): ExtensionSettings {
  const source = (raw ?? {}) as Partial<ExtensionSettings>;
  const strategies = Array.isArray(source.defaultStrategies)
    ? source.defaultStrategies.filter((s): s is Strategy =>
        (ALL_STRATEGIES as string[]).includes(s as string),
      )
    : [];
  let baseUrl = typeof source.serviceBaseUrl === 'string' ? source.serviceBaseUrl.trim() : '';
  baseUrl = baseUrl.replace(/\/+$/, '');
  if (!/^https?:\/\//.test(baseUrl)) baseUrl = DEFAULT_SETTINGS.serviceBaseUrl;
  return {
    serviceBaseUrl: baseUrl,
    defaultStrategies: strategies.length ? strategies : [...ALL_STRATEGIES],
    showComparison:
      typeof source.showComparison === 'boolean'
        ? source.showComparison
        : DEFAULT_SETTINGS.showComparison,
  };
}

// GitHub markup mapping, pinned to the current PR page structure with
// fallbacks. Review-thread comments carry discussion_r ids; later timeline
// comments carry issuecomment ids; the PR description is the first timeline
// body and has neither.
export function resolveLinkLocation(anchor: Element): ResolvedLocation | null {
  const review = anchor.closest('[id^="discussion_r"], .review-comment');
  if (review) {
    return { location: 'review_comment', containerId: numericSuffix(review.id) };
  }
  const comment = anchor.closest('[id^="issuecomment-"]');
  if (comment) {
    return { location: 'comment', containerId: numericSuffix(comment.id) };
  }
  const descriptionHosts = [
    '[data-testid="issue-body"]',
    '#pull_request_body',
    '.timeline-comment',
    '.comment-body',
  ];
  if (descriptionHosts.some((selector) => anchor.closest(selector) !== null)) {
    return { location: 'description', containerId: '' };
  }
  return null;
}

function numericSuffix(id: string): string {
  const match = /(\d+)$/.exec(id ?? '');
  return match ? match[1] : '';
}

export function buildSummarizeRequest(
  linkUrl: string,
  pageUrl: string,
  resolved: ResolvedLocation,
  strategies: Strategy[],
): SummarizeRequest | null {
  const prUrl = prUrlFromPage(pageUrl);
  if (!prUrl || strategies.length === 0) return null;
  return {
    link_url: linkUrl,
    pr_url: prUrl,
    location: resolved.location,
    container_id: resolved.containerId,
    strategies,
  };
}

export async function postSummarize(
  settings: ExtensionSettings,
  request: SummarizeRequest,
  signal?: AbortSignal,
): Promise<SummarizeResponse> {
  const response = await fetch(`${settings.serviceBaseUrl}/api/v1/summarize`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(request),
    signal,
  });
  const body = (await response.json()) as SummarizeResponse & { detail?: unknown };
  if (!response.ok && !body.results) {
    throw new Error(`service returned ${response.status}: ${JSON.stringify(body.detail ?? body)}`);
  }
  return body;
}
