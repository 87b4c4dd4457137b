// Typed wrappers around the user-facing HTTP routes. Every call goes
// through request(), which attaches the session token and normalizes
// the server's {"error": "..."} payloads into ApiError.

export interface FeedItem {
  rank: number;
  article_id: string;
  title: string;
  abstract: string;
  authors: string[];
  categories: string[];
  published: string;
  explanation: string;
  saved: boolean;
  url: string;
}

export interface FeedGroup {
  impression_id: string;
  date: string;
  items: FeedItem[];
}

export interface FeedPage {
  impressions: FeedGroup[];
  page: number;
  total_pages: number;
}

export interface Profile {
  user_id: string;
  email: string;
  name: string;
  topics: string[];
  digest_frequency: string;
  weekly_digest_day: number | null;
  external_links: string[];
  registered_at: string;
}

export interface TopicChip {
  key: string;
  topic: string;
}

export interface TopicState {
  impression_id: string | null;
  topics: TopicChip[];
  profile_topics: string[];
}

export interface LibraryEntry {
  article_id: string;
  title: string;
  authors: string[];
  saved_at: string;
  url: string;
}

export interface FeedbackSubmission {
  kind: string;
  article_id: string;
  relevance: number;
  explanation_satisfaction: number | null;
  persuasiveness: number | null;
  transparency: number | null;
  scrutability: number | null;
  free_text: string;
}

export interface Session {
  session_token: string;
  user_id: string;
  expires_at: string;
}

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

let sessionToken: string | null = null;

export function setToken(token: string | null): void {
  sessionToken = token;
}

export function getToken(): string | null {
  return sessionToken;
}

async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
  const headers: Record<string, string> = {};
  if (body !== undefined) {
    headers["Content-Type"] = "application/json";
  }
  if (sessionToken) {
    headers["Authorization"] = `Bearer ${sessionToken}`;
  }
  const response = await fetch(path, {
    method,
    headers,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await response.text();
  let parsed: unknown = null;
  if (text) {
    try {
      parsed = JSON.parse(text);
    } catch {
      parsed = null;
    }
  }
  if (!response.ok) {
    const message =
      parsed && typeof parsed === "object" && "error" in parsed
        ? String((parsed as { error: unknown }).error)
        : `request failed with status ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return parsed as T;
}

export function register(
  email: string,
  password: string,
  name: string,
  topics: string[],
): Promise<{ user_id: string }> {
  return request("POST", "/user/register", { email, password, name, topics });
}

export function login(email: string, password: string): Promise<Session> {
  return request("POST", "/user/login", { email, password });
}

export function logout(): Promise<{ status: string }> {
  return request("POST", "/user/logout");
}

export function getFeed(page = 1, pageSize = 10): Promise<FeedPage> {
  return request("GET", `/user/feed?page=${page}&page_size=${pageSize}`);
}

export function recordAction(
  impressionId: string,
  itemId: string,
  action: "clicked_web" | "saved" | "unsave",
): Promise<{ status: string; result: string }> {
  return request("POST", "/user/action", {
    impression_id: impressionId,
    item_id: itemId,
    action,
  });
}

export function submitFeedback(feedback: FeedbackSubmission): Promise<{ status: string }> {
  return request("POST", "/user/feedback", feedback);
}

export function getTopics(): Promise<TopicState> {
  return request("GET", "/user/topics");
}

export function topicAction(
  action: "accept" | "reject" | "refresh",
  topic?: string,
): Promise<TopicState> {
  const body: Record<string, string> = { action };
  if (topic !== undefined) {
    body["topic"] = topic;
  }
  return request("POST", "/user/topics/action", body);
}

export function getProfile(): Promise<Profile> {
  return request("GET", "/user/profile");
}

export function updateProfile(changes: Partial<Profile>): Promise<Profile> {
  return request("PUT", "/user/profile", changes);
}

export function getLibrary(): Promise<{ articles: LibraryEntry[] }> {
  return request("GET", "/user/library");
}

export function exportData(): Promise<unknown> {
  return request("GET", "/user/export");
}

export function deleteAccount(): Promise<{ status: string }> {
  return request("DELETE", "/user/account");
}
